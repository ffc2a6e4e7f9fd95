"""Localisation of distant static 3D targets from binary segmentation
masks and known camera poses, with a bank of bootstrap particle filters
and a pinhole-camera experiment simulator."""

from .config import OutputOptions, ScenarioConfig, load_scenario
from .errors import (
    AllZeroWeightsError,
    ConfigError,
    EmptyMaskError,
    FrameMismatchError,
    ImageTooSmallError,
    NonMonotonicFrameIdsError,
    ParallelRaysError,
    PoseLogParseError,
    SeglocError,
    WeakBaselineError,
)
from .estimators import SobelSegmenter, TargetLocalizer
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    PoseNoiseConfig,
    Ray,
    back_project_ray,
    discretise,
    perturb_pose,
    project_point,
    project_points,
    ray_midpoint,
)
from .metrics import (
    RunSummary,
    StepMetric,
    TargetTruth,
    aggregate,
    assign_tracks,
    nlpd,
    rmse_mean_dist,
    rmse_particle,
)
from .pf import (
    FilterParams,
    ParticleSet,
    PosteriorSummary,
    initialize,
    predict,
    resample,
    step,
    summarize,
    weigh,
)
from .simworld import (
    CuboidTarget,
    FrameRecord,
    SegmentationNoiseConfig,
    Trajectory,
    corrupt_mask,
    render_truth_mask,
    run_scenario,
)
from .tracker import MultiTargetTracker, Phase, TrackerParams, TrackState, cluster_pixels, ood_pixels

__version__ = "0.1.0"

__all__ = [
    "AllZeroWeightsError",
    "CameraIntrinsics",
    "CameraPose",
    "ConfigError",
    "CuboidTarget",
    "EmptyMaskError",
    "FilterParams",
    "FrameMismatchError",
    "FrameRecord",
    "ImageTooSmallError",
    "MultiTargetTracker",
    "NonMonotonicFrameIdsError",
    "OutputOptions",
    "ParallelRaysError",
    "ParticleSet",
    "Phase",
    "PoseLogParseError",
    "PoseNoiseConfig",
    "PosteriorSummary",
    "Ray",
    "RunSummary",
    "ScenarioConfig",
    "SegmentationNoiseConfig",
    "SeglocError",
    "SobelSegmenter",
    "StepMetric",
    "TargetLocalizer",
    "TargetTruth",
    "TrackState",
    "TrackerParams",
    "Trajectory",
    "WeakBaselineError",
    "aggregate",
    "assign_tracks",
    "back_project_ray",
    "cluster_pixels",
    "corrupt_mask",
    "discretise",
    "initialize",
    "load_scenario",
    "nlpd",
    "ood_pixels",
    "perturb_pose",
    "predict",
    "project_point",
    "project_points",
    "ray_midpoint",
    "render_truth_mask",
    "resample",
    "rmse_mean_dist",
    "rmse_particle",
    "run_scenario",
    "step",
    "summarize",
    "weigh",
]
