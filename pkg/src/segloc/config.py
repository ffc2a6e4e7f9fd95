"""Scenario configuration: schema, validation with field paths, JSON
loading, and the bundled presets."""

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import CameraIntrinsics, PoseNoiseConfig, rotation_from_rpy_deg
from .pf import FilterParams
from .simworld import CuboidTarget, SegmentationNoiseConfig, Trajectory
from .tracker import TrackerParams


@dataclass
class OutputOptions:
    dump_frames: bool = False
    dump_stride: int = 1

    def __post_init__(self):
        if self.dump_stride < 1:
            raise ValueError("dump_stride must be >= 1")


@dataclass
class ScenarioConfig:
    """Full declarative description of one simulated experiment."""

    camera: CameraIntrinsics
    trajectory: Trajectory
    targets: list
    pose_noise: PoseNoiseConfig = field(default_factory=PoseNoiseConfig)
    segmentation_noise: SegmentationNoiseConfig = field(default_factory=SegmentationNoiseConfig)
    filter_params: FilterParams = field(default_factory=FilterParams)
    tracker_params: TrackerParams = field(default_factory=TrackerParams)
    n_seeds: int = 10
    base_seed: int = 0
    output: OutputOptions = field(default_factory=OutputOptions)

    def __post_init__(self):
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")
        if self.base_seed < 0:
            raise ValueError("base_seed must be >= 0")


def _section(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(name, "must be an object")
    return value


def _build(section: str, cls, kwargs: dict):
    """Construct a validated dataclass, rewriting ValueErrors to carry the
    dotted field path (the validator messages start with the field name)."""
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(section, str(exc)) from exc
    except ValueError as exc:
        message = str(exc)
        fieldname = message.split()[0] if message else ""
        path = section
        if fieldname in kwargs:
            path = f"{section}.{fieldname}" if section else fieldname
        raise ConfigError(path, message) from exc


def _vector(data, path: str, length: int = 3) -> np.ndarray:
    try:
        vec = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, "must be a numeric array") from exc
    if vec.shape != (length,):
        raise ConfigError(path, f"must have {length} components")
    if not np.isfinite(vec).all():
        raise ConfigError(path, "must be finite")
    return vec


def scenario_from_dict(data: dict) -> ScenarioConfig:
    cam = _section(data, "camera")
    camera = _build(
        "camera",
        CameraIntrinsics,
        {
            "f_x": cam.get("f_x", 1200.0),
            "f_y": cam.get("f_y", 1200.0),
            "c_x": cam.get("c_x", 960.0),
            "c_y": cam.get("c_y", 540.0),
            "width": cam.get("width", 1920),
            "height": cam.get("height", 1080),
        },
    )

    if "trajectory" not in data:
        raise ConfigError("trajectory", "section is required")
    traj = _section(data, "trajectory")
    for key in ("start", "end", "step_m"):
        if key not in traj:
            raise ConfigError(f"trajectory.{key}", "is required")
    rpy = traj.get("rpy_deg", [0.0, 0.0, 0.0])
    rpy = _vector(rpy, "trajectory.rpy_deg")
    trajectory = _build(
        "trajectory",
        Trajectory,
        {
            "start": _vector(traj["start"], "trajectory.start"),
            "end": _vector(traj["end"], "trajectory.end"),
            "step_m": traj["step_m"],
            "rotation": rotation_from_rpy_deg(*rpy),
        },
    )

    raw_targets = data.get("targets", [])
    if not isinstance(raw_targets, list):
        raise ConfigError("targets", "must be a list")
    targets = []
    for i, tgt in enumerate(raw_targets):
        path = f"targets[{i}]"
        if not isinstance(tgt, dict) or "centre" not in tgt or "half_extents" not in tgt:
            raise ConfigError(path, "needs centre and half_extents")
        targets.append(
            _build(
                path,
                CuboidTarget,
                {
                    "centre": _vector(tgt["centre"], f"{path}.centre"),
                    "half_extents": _vector(tgt["half_extents"], f"{path}.half_extents"),
                    "appear_after_m": tgt.get("appear_after_m", 0.0),
                },
            )
        )

    noise = _section(data, "segmentation_noise")
    fp_size = noise.get("fp_size_px", [5, 50])
    if not (isinstance(fp_size, (list, tuple)) and len(fp_size) == 2):
        raise ConfigError("segmentation_noise.fp_size_px", "must be [min, max]")
    segmentation_noise = _build(
        "segmentation_noise",
        SegmentationNoiseConfig,
        {
            "rho_fp": noise.get("rho_fp", 0.0),
            "delta_rho_fp": noise.get("delta_rho_fp", 0.0),
            "max_fp": noise.get("max_fp", 0),
            "rho_fn": noise.get("rho_fn", 0.0),
            "rho_pfn": noise.get("rho_pfn", 0.0),
            "delta_rho_pfn": noise.get("delta_rho_pfn", 0.0),
            "fp_size_px": (int(fp_size[0]), int(fp_size[1])),
        },
    )

    pose = _section(data, "pose_noise")
    pose_noise = _build(
        "pose_noise",
        PoseNoiseConfig,
        {
            "max_rot_deg": pose.get("max_rot_deg", 0.0),
            "max_trans_m": pose.get("max_trans_m", 0.0),
        },
    )

    filt = _section(data, "filter")
    filter_params = _build(
        "filter",
        FilterParams,
        {
            "n_particles": filt.get("n_particles", 100_000),
            "sd_init": filt.get("sd_init", 1000.0),
            "tau_min_obs": filt.get("tau_min_obs", 5),
            "pred_noise_coeff": filt.get("pred_noise_coeff", 0.002),
            "ref_distance_m": filt.get("ref_distance_m", 2000.0),
        },
    )

    trk = _section(data, "tracker")
    tracker_params = _build(
        "tracker",
        TrackerParams,
        {
            "theta_po_sd": trk.get("theta_po_sd", 1.0),
            "theta_po_floor_px": trk.get("theta_po_floor_px", 20.0),
            "n_dismiss": trk.get("n_dismiss", 5),
            "n_fuse": trk.get("n_fuse", 5),
            "tau_min_obs": trk.get("tau_min_obs", 5),
            "min_component_px": trk.get("min_component_px", 3),
        },
    )

    out = _section(data, "output")
    output = _build(
        "output",
        OutputOptions,
        {
            "dump_frames": bool(out.get("dump_frames", False)),
            "dump_stride": out.get("dump_stride", 1),
        },
    )

    return _build(
        "",
        ScenarioConfig,
        {
            "camera": camera,
            "trajectory": trajectory,
            "targets": targets,
            "pose_noise": pose_noise,
            "segmentation_noise": segmentation_noise,
            "filter_params": filter_params,
            "tracker_params": tracker_params,
            "n_seeds": data.get("n_seeds", 10),
            "base_seed": data.get("base_seed", 0),
            "output": output,
        },
    )


def bundled_config_names() -> list[str]:
    root = resources.files("segloc") / "configs"
    return sorted(p.name.removesuffix(".json") for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(source) -> ScenarioConfig:
    """Load a scenario from a dict, a JSON file path, or a bundled preset name."""
    if isinstance(source, dict):
        return scenario_from_dict(source)
    path = Path(source)
    if not path.exists():
        name = path.name.removesuffix(".json")
        bundled = resources.files("segloc") / "configs" / f"{name}.json"
        if bundled.is_file():
            return scenario_from_dict(json.loads(bundled.read_text()))
        raise ConfigError("config", f"no such file or bundled preset: {source}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    return scenario_from_dict(data)
