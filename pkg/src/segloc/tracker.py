"""Multi-filter track management: out-of-distribution pixel detection,
candidate confirmation, starvation dismissal, and duplicate fusion.

Each active track owns one particle filter and is only ever updated on
the positive pixels within its own dynamic pixel threshold, which is the
same threshold geometry used to flag out-of-distribution pixels.  Every
positive pixel therefore feeds at most one consumer class per frame:
some track's restricted mask, or the OOD mask that seeds candidates.
"""

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from . import pf
from .errors import ParallelRaysError, WeakBaselineError
from .geometry import CameraIntrinsics, CameraPose, discretise, project_points
from .simworld import FrameRecord

_STRUCT_8CONN = np.ones((3, 3), dtype=bool)


class Phase(enum.Enum):
    CANDIDATE = "candidate"
    ACTIVE = "active"
    DISMISSED = "dismissed"


@dataclass
class TrackerParams:
    """Thresholds of the track lifecycle."""

    theta_po_sd: float = 1.0
    theta_po_floor_px: float = 20.0
    n_dismiss: int = 5
    n_fuse: int = 5
    tau_min_obs: int = 5
    min_component_px: int = 3

    def __post_init__(self):
        if self.theta_po_sd <= 0:
            raise ValueError("theta_po_sd must be > 0")
        if self.theta_po_floor_px < 0:
            raise ValueError("theta_po_floor_px must be >= 0")
        for name in ("n_dismiss", "n_fuse", "tau_min_obs", "min_component_px"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class TrackState:
    """One particle filter plus its lifecycle bookkeeping."""

    id: int
    phase: Phase
    particles: pf.ParticleSet | None = None
    candidate_history: list = field(default_factory=list)
    miss_count: int = 0
    update_count: int = 0
    overlap_counts: dict = field(default_factory=dict)


def cluster_pixels(mask: np.ndarray, min_px: int) -> list[tuple[np.ndarray, int]]:
    """8-connected components of at least min_px pixels, reduced to their
    (u, v) pixel centroids and ordered by size descending."""
    labels, n = ndimage.label(mask, structure=_STRUCT_8CONN)
    clusters = []
    for lbl in range(1, n + 1):
        vs, us = np.nonzero(labels == lbl)
        if vs.size >= min_px:
            centroid = np.array([us.mean(), vs.mean()])
            clusters.append((centroid, int(vs.size)))
    clusters.sort(key=lambda c: -c[1])
    return clusters


def projected_cloud_pixels(
    ps: pf.ParticleSet, intrinsics: CameraIntrinsics, pose: CameraPose
) -> tuple[np.ndarray, float | None]:
    """Discretised in-frame projections of a particle cloud, plus the
    cloud's pixel-space spread (mean of the u and v standard deviations
    of the real-valued in-frame projections).  Spread is None when no
    particle projects into the frame."""
    pix, in_front = project_points(ps.positions, intrinsics, pose)
    pix = pix[in_front]
    if pix.size == 0:
        return np.zeros((0, 2), dtype=np.int64), None
    ipix = discretise(pix)
    inside = (
        (ipix[:, 0] >= 0)
        & (ipix[:, 0] < intrinsics.width)
        & (ipix[:, 1] >= 0)
        & (ipix[:, 1] < intrinsics.height)
    )
    if not inside.any():
        return np.zeros((0, 2), dtype=np.int64), None
    spread = float((pix[inside, 0].std() + pix[inside, 1].std()) / 2.0)
    return ipix[inside], spread


def covered_pixels(mask: np.ndarray, cloud_pixels: np.ndarray, theta: float) -> np.ndarray:
    """Positive pixels within theta (pixels) of the nearest cloud pixel."""
    out = np.zeros_like(mask)
    if cloud_pixels.shape[0] == 0 or not mask.any():
        return out
    cloud_img = np.zeros_like(mask)
    cloud_img[cloud_pixels[:, 1], cloud_pixels[:, 0]] = True
    vs, us = np.nonzero(mask)
    d2 = pf.squared_pixel_distances(cloud_img, np.column_stack([us, vs]))
    near = d2 <= theta * theta
    out[vs[near], us[near]] = True
    return out


def _track_theta(spread: float | None, params: TrackerParams) -> float:
    if spread is None:
        return params.theta_po_floor_px
    return max(params.theta_po_sd * spread, params.theta_po_floor_px)


def ood_pixels(
    mask: np.ndarray,
    tracks: list[TrackState],
    intrinsics: CameraIntrinsics,
    pose: CameraPose,
    params: TrackerParams,
) -> np.ndarray:
    """Positive pixels beyond every active track's dynamic threshold.

    With no active tracks, every positive pixel is out-of-distribution.
    """
    covered = np.zeros_like(mask)
    for track in tracks:
        if track.phase is not Phase.ACTIVE or track.particles is None:
            continue
        cloud, spread = projected_cloud_pixels(track.particles, intrinsics, pose)
        covered |= covered_pixels(mask, cloud, _track_theta(spread, params))
    return mask & ~covered


class MultiTargetTracker:
    """Bank of single-target filters with spawn/dismiss/fuse lifecycle.

    ``update`` consumes one frame; per-track randomness comes from a
    caller-supplied factory keyed by track id, so tracks never perturb
    each other's draws.
    """

    def __init__(
        self,
        intrinsics: CameraIntrinsics,
        filter_params: pf.FilterParams,
        tracker_params: TrackerParams,
    ):
        self.intrinsics = intrinsics
        self.filter_params = filter_params
        self.tracker_params = tracker_params
        self.tracks: list[TrackState] = []
        self._next_id = 0

    def claim_id(self) -> int:
        track_id = self._next_id
        self._next_id += 1
        return track_id

    def active_tracks(self) -> list[TrackState]:
        return [t for t in self.tracks if t.phase is Phase.ACTIVE]

    def update(
        self, frame: FrameRecord, track_rng: Callable[[int], np.random.Generator]
    ) -> list[TrackState]:
        mask = frame.mask
        pose = frame.reported_pose
        params = self.tracker_params
        actives = self.active_tracks()

        # Predict every active filter, then partition the positive pixels
        # against the predicted clouds (the same clouds the update weighs).
        generators, predicted, restricted = {}, {}, {}
        covered_any = np.zeros_like(mask)
        for track in actives:
            gen = track_rng(track.id)
            generators[track.id] = gen
            ps = pf.predict(track.particles, pose.position, self.filter_params, gen)
            predicted[track.id] = ps
            cloud, spread = projected_cloud_pixels(ps, self.intrinsics, pose)
            cov = covered_pixels(mask, cloud, _track_theta(spread, params))
            restricted[track.id] = cov
            covered_any |= cov
        ood = mask & ~covered_any

        for track in actives:
            own = restricted[track.id]
            if own.any():
                weighted = pf.weigh(predicted[track.id], own, self.intrinsics, pose)
                track.particles = pf.resample(weighted, generators[track.id])
                track.miss_count = 0
                track.update_count += 1
            else:
                track.particles = predicted[track.id]
                track.miss_count += 1
                if track.miss_count >= params.n_dismiss:
                    track.phase = Phase.DISMISSED

        self._update_candidates(ood, pose, track_rng)
        self._fuse_duplicates()
        return self.tracks

    def _update_candidates(self, ood, pose, track_rng) -> None:
        params = self.tracker_params
        clusters = cluster_pixels(ood, params.min_component_px)
        candidates = [t for t in self.tracks if t.phase is Phase.CANDIDATE]
        radius = 4.0 * params.theta_po_floor_px
        matched: dict[int, np.ndarray] = {}
        new_candidates = []
        for centroid, _size in clusters:
            best, best_dist = None, radius
            for cand in candidates:
                if cand.id in matched:
                    continue
                dist = float(np.linalg.norm(cand.candidate_history[-1][1] - centroid))
                if dist <= best_dist:
                    best, best_dist = cand, dist
            if best is not None:
                matched[best.id] = centroid
            else:
                new_candidates.append(
                    TrackState(self.claim_id(), Phase.CANDIDATE, candidate_history=[(pose, centroid)])
                )

        for cand in candidates:
            if cand.id not in matched:
                self.tracks.remove(cand)  # candidates need consecutive observations
                continue
            cand.candidate_history.append((pose, matched[cand.id]))
            if len(cand.candidate_history) >= params.tau_min_obs:
                try:
                    cand.particles = pf.initialize(
                        cand.candidate_history[0],
                        cand.candidate_history[-1],
                        self.intrinsics,
                        self.filter_params,
                        track_rng(cand.id),
                    )
                except (ParallelRaysError, WeakBaselineError):
                    self.tracks.remove(cand)  # retried naturally by later clusters
                    continue
                cand.phase = Phase.ACTIVE
                cand.candidate_history = []
        self.tracks.extend(new_candidates)

    def _fuse_duplicates(self) -> None:
        """Dismiss the younger of two tracks whose means stay mutually within
        one combined trace-based SD for n_fuse consecutive frames."""
        actives = self.active_tracks()
        summaries = {t.id: pf.summarize(t.particles) for t in actives}
        spreads = {
            tid: float(np.sqrt(np.trace(s.covariance) / 3.0)) for tid, s in summaries.items()
        }
        for i, ta in enumerate(actives):
            for tb in actives[i + 1 :]:
                if ta.phase is not Phase.ACTIVE or tb.phase is not Phase.ACTIVE:
                    continue
                gap = float(np.linalg.norm(summaries[ta.id].mean - summaries[tb.id].mean))
                if gap <= spreads[ta.id] + spreads[tb.id]:
                    count = ta.overlap_counts.get(tb.id, 0) + 1
                    ta.overlap_counts[tb.id] = count
                    if count >= self.tracker_params.n_fuse:
                        loser = tb if ta.update_count >= tb.update_count else ta
                        loser.phase = Phase.DISMISSED
                        ta.overlap_counts.pop(tb.id, None)
                else:
                    ta.overlap_counts.pop(tb.id, None)
