"""Deterministic derivation of random streams.

Every consumer of randomness gets its own stream keyed by
(base seed, frame index, purpose[, track id]) through ``SeedSequence``.
Consumers therefore cannot perturb each other's draws: toggling frame
dumps, adding or removing a track, or reordering seeds never changes any
other stream.
"""

import numpy as np

POSE_NOISE = 1
MASK_NOISE = 2
FILTER = 3


def frame_stream(seed: int, frame_index: int, purpose: int) -> np.random.Generator:
    """Stream for simulation-side draws of one frame."""
    return np.random.default_rng(np.random.SeedSequence((seed, frame_index, purpose)))


def track_stream(seed: int, frame_index: int, track_id: int) -> np.random.Generator:
    """Stream for one track's filter draws in one frame."""
    return np.random.default_rng(np.random.SeedSequence((seed, frame_index, FILTER, track_id)))
