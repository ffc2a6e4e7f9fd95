"""Synthetic experiment generation: cuboid targets, a linear camera sweep
sampled every ``step_m`` metres, ground-truth convex-hull masks, and the
persistent false-positive / false-negative corruption processes.

Masks are boolean arrays of shape (height, width), row-major, indexed
[v, u].  A pixel is set when its lattice point (u, v) lies inside (or on
the boundary of) the convex hull of the target's discretised corner
projections.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator

import numpy as np

from .geometry import CameraIntrinsics, CameraPose, discretise, perturb_pose, project_points
from .seeding import MASK_NOISE, POSE_NOISE, frame_stream

if TYPE_CHECKING:
    from .config import ScenarioConfig


@dataclass
class CuboidTarget:
    """Axis-aligned cuboid defined by its centre and half extents, visible
    once the camera has travelled ``appear_after_m`` metres."""

    centre: np.ndarray
    half_extents: np.ndarray
    appear_after_m: float = 0.0

    def __post_init__(self):
        self.centre = np.asarray(self.centre, dtype=float)
        self.half_extents = np.asarray(self.half_extents, dtype=float)
        if not (self.half_extents > 0).all():
            raise ValueError("half_extents must be positive")
        if self.appear_after_m < 0:
            raise ValueError("appear_after_m must be non-negative")

    def corners(self) -> np.ndarray:
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float
        )
        return self.centre + signs * self.half_extents


@dataclass
class Trajectory:
    """Linear camera path from start to end with a fixed orientation,
    sampled every ``step_m`` metres of translation."""

    start: np.ndarray
    end: np.ndarray
    step_m: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float)
        self.end = np.asarray(self.end, dtype=float)
        self.rotation = np.asarray(self.rotation, dtype=float)
        if self.step_m <= 0:
            raise ValueError("step_m must be positive")
        if np.array_equal(self.start, self.end):
            raise ValueError("start and end must differ")

    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    def direction(self) -> np.ndarray:
        return (self.end - self.start) / self.length()


@dataclass
class SegmentationNoiseConfig:
    """Rates of the persistent false-positive and false-negative processes."""

    rho_fp: float = 0.0
    delta_rho_fp: float = 0.0
    max_fp: int = 0
    rho_fn: float = 0.0
    rho_pfn: float = 0.0
    delta_rho_pfn: float = 0.0
    fp_size_px: tuple[int, int] = (5, 50)

    def __post_init__(self):
        for name in ("rho_fp", "delta_rho_fp", "rho_fn", "rho_pfn", "delta_rho_pfn"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability in [0, 1]")
        if self.max_fp < 0:
            raise ValueError("max_fp must be non-negative")
        lo, hi = self.fp_size_px
        if not (1 <= lo <= hi):
            raise ValueError("fp_size_px must satisfy 1 <= min <= max")


@dataclass
class FrameRecord:
    """One simulation step: the unit of exchange between simulator and filter."""

    index: int
    translation_m: float
    reported_pose: CameraPose
    true_pose: CameraPose
    mask: np.ndarray


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull of integer 2-D points by monotone chain, in exact
    arbitrary-precision arithmetic.  Returns the hull vertices in
    counter-clockwise order (with respect to the u-right, v-down pixel
    axes the winding appears clockwise on screen); collinear inputs give
    the two extreme points, coincident inputs a single point."""
    pts = sorted({(int(p[0]), int(p[1])) for p in np.asarray(points)})
    if len(pts) <= 2:
        return np.array(pts, dtype=np.int64).reshape(len(pts), 2)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=np.int64)


def fill_hull(hull: np.ndarray, width: int, height: int) -> np.ndarray:
    """Rasterise a hull onto a (height, width) grid: a pixel is set when
    its lattice point lies inside the hull, boundary inclusive."""
    mask = np.zeros((height, width), dtype=bool)
    if len(hull) == 0:
        return mask
    x0 = max(int(hull[:, 0].min()), 0)
    x1 = min(int(hull[:, 0].max()), width - 1)
    y0 = max(int(hull[:, 1].min()), 0)
    y1 = min(int(hull[:, 1].max()), height - 1)
    if x0 > x1 or y0 > y1:
        return mask
    if len(hull) == 1:
        mask[hull[0, 1], hull[0, 0]] = True
        return mask

    us, vs = np.meshgrid(
        np.arange(x0, x1 + 1, dtype=np.int64), np.arange(y0, y1 + 1, dtype=np.int64)
    )
    if len(hull) == 2:
        (ax, ay), (bx, by) = hull
        on_line = (bx - ax) * (vs - ay) == (by - ay) * (us - ax)
        within = (
            (np.minimum(ax, bx) <= us)
            & (us <= np.maximum(ax, bx))
            & (np.minimum(ay, by) <= vs)
            & (vs <= np.maximum(ay, by))
        )
        mask[y0 : y1 + 1, x0 : x1 + 1] = on_line & within
        return mask

    # int64 is plenty for sensor-scale coordinates; fall back to exact
    # Python integers for pathological near-plane projections.
    if np.abs(hull).max() > 2**30:
        inside = np.zeros_like(us, dtype=bool)
        hull_list = [(int(x), int(y)) for x, y in hull]
        for i in range(us.shape[0]):
            for j in range(us.shape[1]):
                inside[i, j] = _point_in_polygon(int(us[i, j]), int(vs[i, j]), hull_list)
        mask[y0 : y1 + 1, x0 : x1 + 1] = inside
        return mask

    inside = np.ones_like(us, dtype=bool)
    n = len(hull)
    for i in range(n):
        ax, ay = hull[i]
        bx, by = hull[(i + 1) % n]
        # hull is CCW, so interior points satisfy cross >= 0 for every edge
        inside &= (bx - ax) * (vs - ay) - (by - ay) * (us - ax) >= 0
    mask[y0 : y1 + 1, x0 : x1 + 1] = inside
    return mask


def _point_in_polygon(px: int, py: int, hull: list) -> bool:
    n = len(hull)
    for i in range(n):
        ax, ay = hull[i]
        bx, by = hull[(i + 1) % n]
        if (bx - ax) * (py - ay) - (by - ay) * (px - ax) < 0:
            return False
    return True


def render_truth_mask(
    targets: list,
    intrinsics: CameraIntrinsics,
    true_pose: CameraPose,
    translation_m: float,
) -> np.ndarray:
    """Noiseless segmentation: the union over visible targets of the filled
    convex hull of their discretised in-front corner projections."""
    mask = np.zeros((intrinsics.height, intrinsics.width), dtype=bool)
    for target in targets:
        if target.appear_after_m > translation_m:
            continue
        pix, in_front = project_points(target.corners(), intrinsics, true_pose)
        if not in_front.any():
            continue
        hull = convex_hull(discretise(pix[in_front]))
        mask |= fill_hull(hull, intrinsics.width, intrinsics.height)
    return mask


class NoiseState:
    """Mutable registry of persistent corruption processes.

    ``fp_rects`` holds active false-positive rectangles as (x0, y0, w, h);
    ``pfn`` is None or (fraction, corner) for the partial false-negative
    rectangle, re-anchored to the current target bounding box each frame.
    """

    def __init__(self):
        self.fp_rects: list[tuple[int, int, int, int]] = []
        self.pfn: tuple[float, int] | None = None


def _paint_rects(mask: np.ndarray, rects) -> None:
    for x0, y0, w, h in rects:
        mask[y0 : y0 + h, x0 : x0 + w] = True


def corrupt_mask(
    mask: np.ndarray,
    state: NoiseState,
    cfg: SegmentationNoiseConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Apply the frame's segmentation noise.

    A full false negative (drawn independently per frame) blanks the true
    target pixels only: active false-positive rectangles still render, and
    the registry is frozen for that frame.  Otherwise the registry advances
    (dismissals before spawns, so a new rectangle persists for at least one
    frame), the partial-false-negative rectangle is carved out of the
    target bounding box, and active false positives are painted on top.
    """
    height, width = mask.shape
    if cfg.rho_fn > 0 and rng.random() < cfg.rho_fn:
        out = np.zeros_like(mask)
        _paint_rects(out, state.fp_rects)
        return out

    if state.fp_rects and cfg.delta_rho_fp > 0:
        state.fp_rects = [r for r in state.fp_rects if rng.random() >= cfg.delta_rho_fp]
    if cfg.rho_fp > 0 and len(state.fp_rects) < cfg.max_fp and rng.random() < cfg.rho_fp:
        lo, hi = cfg.fp_size_px
        w = int(rng.integers(lo, min(hi, width) + 1))
        h = int(rng.integers(lo, min(hi, height) + 1))
        x0 = int(rng.integers(0, width - w + 1))
        y0 = int(rng.integers(0, height - h + 1))
        state.fp_rects.append((x0, y0, w, h))

    if state.pfn is not None and cfg.delta_rho_pfn > 0 and rng.random() < cfg.delta_rho_pfn:
        state.pfn = None
    if state.pfn is None and cfg.rho_pfn > 0 and rng.random() < cfg.rho_pfn:
        state.pfn = (float(rng.uniform(0.3, 0.7)), int(rng.integers(0, 4)))

    out = mask.copy()
    if state.pfn is not None and mask.any():
        fraction, corner = state.pfn
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        by0, by1 = int(rows[0]), int(rows[-1])
        bx0, bx1 = int(cols[0]), int(cols[-1])
        rh = max(1, round(fraction * (by1 - by0 + 1)))
        rw = max(1, round(fraction * (bx1 - bx0 + 1)))
        ys = by0 if corner in (0, 1) else by1 - rh + 1
        xs = bx0 if corner in (0, 2) else bx1 - rw + 1
        out[ys : ys + rh, xs : xs + rw] = False
    _paint_rects(out, state.fp_rects)
    return out


def run_scenario(cfg: "ScenarioConfig", seed: int) -> Iterator[FrameRecord]:
    """Generate the frame stream of one seeded run.

    Yields a FrameRecord per ``step_m`` metres of translation, start
    inclusive.  Masks are rendered from the true pose; the reported pose
    carries the injected estimation noise.  Fully deterministic given
    (cfg, seed): every frame draws from its own derived streams.
    """
    traj = cfg.trajectory
    n_steps = int(np.floor(traj.length() / traj.step_m + 1e-9)) + 1
    direction = traj.direction()
    state = NoiseState()
    for i in range(n_steps):
        translation = i * traj.step_m
        true_pose = CameraPose(traj.rotation, traj.start + translation * direction)
        reported = perturb_pose(true_pose, cfg.pose_noise, frame_stream(seed, i, POSE_NOISE))
        mask = render_truth_mask(cfg.targets, cfg.camera, true_pose, translation)
        mask = corrupt_mask(mask, state, cfg.segmentation_noise, frame_stream(seed, i, MASK_NOISE))
        yield FrameRecord(i, translation, reported, true_pose, mask)
