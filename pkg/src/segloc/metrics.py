"""Localisation error metrics and the aggregation windows used to report them.

Two RMSE variants coexist: the particle form sqrt(mean ||p_i - m_t||^2)
and the mean-distance form ||mean(p) - m_t||.  They are linked exactly by
rmse_particle^2 = rmse_mean_dist^2 + trace(population covariance), which
is why covariances here use the population (1/N) normaliser.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import multivariate_normal

from .pf import COV_REGULARISER, ParticleSet, summarize


@dataclass
class TargetTruth:
    """Ground-truth target centre."""

    target_id: int
    centre: np.ndarray


@dataclass
class StepMetric:
    """Per-track metrics of one step."""

    frame: int
    translation_m: float
    track_id: int
    assigned_target_id: int
    rmse_mean_dist_m: float
    rmse_particle_m: float
    nlpd: float


@dataclass
class RunSummary:
    """Aggregates of one seeded run; window means are None when the run
    never reaches the window."""

    rmse_mean_dist_min: float | None
    rmse_mean_dist_window: float | None
    rmse_particle_min: float | None
    rmse_particle_window: float | None
    nlpd_min: float | None


def rmse_particle(ps: ParticleSet, target_centre: np.ndarray) -> float:
    """Root mean squared particle distance to the target centre."""
    d2 = ((ps.positions - np.asarray(target_centre, dtype=float)) ** 2).sum(axis=1)
    return float(np.sqrt(d2.mean()))


def rmse_mean_dist(ps: ParticleSet, target_centre: np.ndarray) -> float:
    """Euclidean distance between the cloud mean and the target centre."""
    return float(np.linalg.norm(ps.positions.mean(axis=0) - np.asarray(target_centre, dtype=float)))


def nlpd(ps: ParticleSet, target_centre: np.ndarray) -> float:
    """Negative log-density of the target centre under the moment-matched
    Gaussian of the cloud (covariance regularised, so always finite)."""
    summary = summarize(ps)
    return float(-multivariate_normal.logpdf(target_centre, summary.mean, summary.covariance))


def assign_tracks(tracks, truths: list[TargetTruth]) -> dict[int, int]:
    """Map each track id to the nearest truth by cloud-mean distance;
    ties break toward the lower target id.  Multiple tracks may share a
    target."""
    ordered = sorted(truths, key=lambda t: t.target_id)
    centres = np.array([t.centre for t in ordered], dtype=float)
    assignment = {}
    for track in tracks:
        mean = track.particles.positions.mean(axis=0)
        distances = np.linalg.norm(centres - mean, axis=1)
        assignment[track.id] = ordered[int(np.argmin(distances))].target_id
    return assignment


def aggregate(
    rows: list[StepMetric], window: tuple[float, float] = (200.0, 1000.0)
) -> RunSummary:
    """Per-run aggregates: the minimum over steps with at least one active
    track, and the mean over steps whose translation falls in the window.

    When several tracks report at one step, the step value is the mean of
    their metrics.
    """
    by_step: dict[float, list[StepMetric]] = {}
    for row in rows:
        by_step.setdefault(row.translation_m, []).append(row)
    if not by_step:
        return RunSummary(None, None, None, None, None)

    lo, hi = window
    mins = {"mean_dist": [], "particle": [], "nlpd": []}
    window_vals = {"mean_dist": [], "particle": []}
    for translation in sorted(by_step):
        step_rows = by_step[translation]
        mean_dist = float(np.mean([r.rmse_mean_dist_m for r in step_rows]))
        particle = float(np.mean([r.rmse_particle_m for r in step_rows]))
        step_nlpd = float(np.mean([r.nlpd for r in step_rows]))
        mins["mean_dist"].append(mean_dist)
        mins["particle"].append(particle)
        mins["nlpd"].append(step_nlpd)
        if lo <= translation <= hi:
            window_vals["mean_dist"].append(mean_dist)
            window_vals["particle"].append(particle)

    def _mean(values):
        return float(np.mean(values)) if values else None

    return RunSummary(
        rmse_mean_dist_min=min(mins["mean_dist"]),
        rmse_mean_dist_window=_mean(window_vals["mean_dist"]),
        rmse_particle_min=min(mins["particle"]),
        rmse_particle_window=_mean(window_vals["particle"]),
        nlpd_min=min(mins["nlpd"]),
    )
