"""Single-target bootstrap particle filter over static 3D positions.

The observation model is the exponential pixel-distance weight
w = exp(-d2), where d2 is the squared Euclidean pixel distance between a
particle's discretised projection and the nearest positive mask pixel.
All operations are pure functions of their inputs; randomness enters only
through explicit generators.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import AllZeroWeightsError, EmptyMaskError, WeakBaselineError
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    back_project_ray,
    discretise,
    project_points,
    ray_midpoint,
)

COV_REGULARISER = 1e-6
MIN_BASELINE_M = 1.0


@dataclass
class FilterParams:
    """Particle count, initial spread, and prediction-noise scaling."""

    n_particles: int = 100_000
    sd_init: float = 1000.0
    tau_min_obs: int = 5
    pred_noise_coeff: float = 0.002
    ref_distance_m: float = 2000.0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.sd_init <= 0:
            raise ValueError("sd_init must be > 0")
        if self.tau_min_obs < 2:
            raise ValueError("tau_min_obs must be >= 2")
        if self.pred_noise_coeff < 0:
            raise ValueError("pred_noise_coeff must be >= 0")
        if self.ref_distance_m <= 0:
            raise ValueError("ref_distance_m must be > 0")


@dataclass
class ParticleSet:
    """N weighted position hypotheses: positions (N, 3), weights (N,)."""

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must have shape (N, 3)")
        if self.weights.shape != (self.positions.shape[0],):
            raise ValueError("weights must have shape (N,)")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def degenerate(self) -> bool:
        """True when every weight is zero (no particle could be scored)."""
        return not (self.weights > 0).any()


@dataclass
class PosteriorSummary:
    """Moment summary of the particle cloud."""

    mean: np.ndarray
    covariance: np.ndarray


def squared_pixel_distances(mask: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance from each query pixel to the
    nearest positive mask pixel.

    Implemented with a Euclidean distance transform restricted to the
    joint bounding box of the positives and the queries (the nearest
    positive to any query always lies inside that box, so cropping is
    exact).  Distances are returned as int64: nearest-feature indices keep
    the arithmetic in integers.  Queries must lie inside the mask frame.
    """
    pix = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
    if pix.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise EmptyMaskError("mask has no positive pixels")
    qu, qv = pix[:, 0], pix[:, 1]
    y0 = min(int(ys.min()), int(qv.min()))
    y1 = max(int(ys.max()), int(qv.max()))
    x0 = min(int(xs.min()), int(qu.min()))
    x1 = max(int(xs.max()), int(qu.max()))
    sub = mask[y0 : y1 + 1, x0 : x1 + 1]
    nearest = ndimage.distance_transform_edt(
        ~sub, return_distances=False, return_indices=True
    )
    ny = nearest[0][qv - y0, qu - x0] + y0
    nx = nearest[1][qv - y0, qu - x0] + x0
    return (qv - ny) ** 2 + (qu - nx) ** 2


def initialize(
    obs_a: tuple[CameraPose, np.ndarray],
    obs_b: tuple[CameraPose, np.ndarray],
    intrinsics: CameraIntrinsics,
    params: FilterParams,
    rng: np.random.Generator,
) -> ParticleSet:
    """Two-view initialisation from (pose, segment centroid) observations.

    The initial mean is the two-ray midpoint; the isotropic spread is
    sd_init scaled by the midpoint's distance from the later camera over
    ref_distance_m.  Raises WeakBaselineError when the camera centres are
    closer than 1 m, and propagates ParallelRaysError from triangulation.
    """
    pose_a, centroid_a = obs_a
    pose_b, centroid_b = obs_b
    baseline = float(np.linalg.norm(pose_a.position - pose_b.position))
    if baseline < MIN_BASELINE_M:
        raise WeakBaselineError(f"baseline {baseline:.3f} m is below {MIN_BASELINE_M} m")
    mean = ray_midpoint(
        back_project_ray(centroid_a, intrinsics, pose_a),
        back_project_ray(centroid_b, intrinsics, pose_b),
    )
    sd = params.sd_init * float(np.linalg.norm(mean - pose_b.position)) / params.ref_distance_m
    positions = mean + sd * rng.standard_normal((params.n_particles, 3))
    weights = np.full(params.n_particles, 1.0 / params.n_particles)
    return ParticleSet(positions, weights)


def predict(
    ps: ParticleSet,
    camera_centre: np.ndarray,
    params: FilterParams,
    rng: np.random.Generator,
) -> ParticleSet:
    """Displace each particle by isotropic Gaussian noise whose SD is
    pred_noise_coeff times its distance from the camera; weights unchanged."""
    distances = np.linalg.norm(ps.positions - camera_centre, axis=1)
    noise = rng.standard_normal(ps.positions.shape) * (params.pred_noise_coeff * distances)[:, None]
    return ParticleSet(ps.positions + noise, ps.weights)


def weigh(
    ps: ParticleSet,
    mask: np.ndarray,
    intrinsics: CameraIntrinsics,
    pose: CameraPose,
) -> ParticleSet:
    """Exponential pixel-distance weighting against the positive pixels.

    Particles behind the camera or whose discretised projection falls
    outside the frame get weight 0.  If every in-frame weight underflows,
    the distances are re-centred on their minimum (an argmax-preserving
    rescale) so the closest particle gets weight 1.
    """
    if not mask.any():
        raise EmptyMaskError("weigh requires at least one positive pixel")
    pix, in_front = project_points(ps.positions, intrinsics, pose)
    weights = np.zeros(ps.n)
    ipix = np.full((ps.n, 2), -1, dtype=np.int64)
    ipix[in_front] = discretise(pix[in_front])
    valid = (
        in_front
        & (ipix[:, 0] >= 0)
        & (ipix[:, 0] < intrinsics.width)
        & (ipix[:, 1] >= 0)
        & (ipix[:, 1] < intrinsics.height)
    )
    if valid.any():
        d2 = squared_pixel_distances(mask, ipix[valid])
        w = np.exp(-d2.astype(float))
        if not (w > 0).any():
            w = np.exp(-(d2 - d2.min()).astype(float))
        weights[valid] = w
    return ParticleSet(ps.positions, weights)


def resample(ps: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Multinomial resampling proportional to the weights; output weights uniform."""
    total = ps.weights.sum()
    if not total > 0:
        raise AllZeroWeightsError("cannot resample: all weights are zero")
    idx = rng.choice(ps.n, size=ps.n, p=ps.weights / total)
    return ParticleSet(ps.positions[idx], np.full(ps.n, 1.0 / ps.n))


def step(
    ps: ParticleSet,
    frame,
    intrinsics: CameraIntrinsics,
    params: FilterParams,
    rng: np.random.Generator,
) -> ParticleSet:
    """One bootstrap cycle: predict, then weigh and resample when the
    frame's mask has positive pixels; prediction only otherwise."""
    ps = predict(ps, frame.reported_pose.position, params, rng)
    if frame.mask.any():
        ps = resample(weigh(ps, frame.mask, intrinsics, frame.reported_pose), rng)
    return ps


def summarize(ps: ParticleSet) -> PosteriorSummary:
    """Unweighted mean and population covariance, regularised for invertibility."""
    mean = ps.positions.mean(axis=0)
    centred = ps.positions - mean
    cov = centred.T @ centred / ps.n + COV_REGULARISER * np.eye(3)
    return PosteriorSummary(mean, cov)
