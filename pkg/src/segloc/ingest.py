"""Real-data ingestion: Sobel edge masks from grayscale frames and camera
poses from GNSS-style logs.

Grayscale images are uint8 arrays of shape (height, width).  The default
segmentation pipeline is sobel -> threshold -> erode -> dilate; every
stage is exposed separately so the CLI can reconfigure it.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ImageTooSmallError, NonMonotonicFrameIdsError, PoseLogParseError
from .geometry import CameraPose, rotation_from_rpy_deg

POSE_LOG_COLUMNS = ["frame_id", "x", "y", "z", "roll", "pitch", "yaw"]

_STRUCT_3X3 = np.ones((3, 3), dtype=bool)


def sobel_response(image: np.ndarray) -> np.ndarray:
    """Unclamped absolute horizontal-Sobel response (int32), replicate-padded.

    Kernel [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]: the x-derivative, which
    responds to vertical structure.
    """
    img = np.asarray(image)
    if img.ndim != 2 or img.shape[0] < 3 or img.shape[1] < 3:
        raise ImageTooSmallError("image must be at least 3x3")
    p = np.pad(img.astype(np.int32), 1, mode="edge")
    diff = p[:, 2:] - p[:, :-2]
    response = diff[:-2, :] + 2 * diff[1:-1, :] + diff[2:, :]
    return np.abs(response)


def sobel_horizontal(image: np.ndarray) -> np.ndarray:
    """Horizontal Sobel magnitude clamped to the 0-255 range."""
    return np.minimum(sobel_response(image), 255).astype(np.uint8)


def threshold(image: np.ndarray, t: int) -> np.ndarray:
    """Binary mask: bit set iff the sample is >= t."""
    return np.asarray(image) >= t


def erode(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    """3x3 full-structuring-element erosion; out-of-frame counts as background."""
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    if iterations == 0:
        return np.asarray(mask, dtype=bool).copy()
    return ndimage.binary_erosion(
        mask, structure=_STRUCT_3X3, iterations=iterations, border_value=0
    )


def dilate(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    """3x3 full-structuring-element dilation; out-of-frame counts as background."""
    if iterations < 0:
        raise ValueError("iterations must be non-negative")
    if iterations == 0:
        return np.asarray(mask, dtype=bool).copy()
    return ndimage.binary_dilation(
        mask, structure=_STRUCT_3X3, iterations=iterations, border_value=0
    )


def segment_image(
    image: np.ndarray,
    sobel_threshold: int = 64,
    erode_iterations: int = 1,
    dilate_iterations: int = 2,
) -> np.ndarray:
    """Default pipeline: sobel -> threshold -> erode -> dilate."""
    mask = threshold(sobel_horizontal(image), sobel_threshold)
    return dilate(erode(mask, erode_iterations), dilate_iterations)


@dataclass
class PoseLogEntry:
    """One pose log row: camera centre in metres, attitude in degrees."""

    frame_id: int
    position: np.ndarray
    roll: float
    pitch: float
    yaw: float


def load_pose_log(path) -> list[PoseLogEntry]:
    """Parse a pose log CSV: a header line, then frame_id,x,y,z,roll,pitch,yaw."""
    entries: list[PoseLogEntry] = []
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        for line_no, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if line_no == 1:
                header = [c.strip().lower() for c in row]
                if header != POSE_LOG_COLUMNS:
                    raise PoseLogParseError(
                        1, f"expected header {','.join(POSE_LOG_COLUMNS)}, got {','.join(row)}"
                    )
                continue
            if len(row) != 7:
                raise PoseLogParseError(line_no, f"expected 7 fields, got {len(row)}")
            try:
                frame_id = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise PoseLogParseError(line_no, str(exc)) from exc
            if not all(np.isfinite(values)):
                raise PoseLogParseError(line_no, "non-finite value")
            if entries and frame_id <= entries[-1].frame_id:
                raise NonMonotonicFrameIdsError(
                    f"frame id {frame_id} at line {line_no} does not increase"
                )
            entries.append(
                PoseLogEntry(frame_id, np.array(values[:3]), values[3], values[4], values[5])
            )
    return entries


def pose_from_entry(entry: PoseLogEntry) -> CameraPose:
    """Camera pose from a log entry (yaw -> pitch -> roll composition)."""
    rotation = rotation_from_rpy_deg(entry.roll, entry.pitch, entry.yaw)
    return CameraPose(rotation, entry.position)
