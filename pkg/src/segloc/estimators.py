"""scikit-learn style front ends.

``TargetLocalizer`` consumes a sequence of (pose, mask) observations and
estimates the 3D positions of the static targets that produced them,
exposing the usual ``fit`` / ``partial_fit`` / ``predict`` surface and
``get_params`` round-tripping.  ``SobelSegmenter`` is a stateless
transformer wrapping the edge-based segmentation pipeline, so it can sit
in front of the localiser in an sklearn ``Pipeline``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .geometry import CameraIntrinsics, CameraPose
from .ingest import segment_image
from .pf import FilterParams, summarize
from .seeding import track_stream
from .simworld import FrameRecord
from .tracker import MultiTargetTracker, TrackerParams


def _as_frame_records(X, start_index: int, start_translation: float, last_position):
    """Normalise input to FrameRecord objects.

    Accepts FrameRecord instances or (pose, mask) pairs; for pairs the
    translation is accumulated from the camera displacement.
    """
    frames = []
    index = start_index
    translation = start_translation
    position = last_position
    for item in X:
        if isinstance(item, FrameRecord):
            frames.append(item)
            position = item.reported_pose.position
            translation = item.translation_m
            index = item.index + 1
            continue
        pose, mask = item
        if not isinstance(pose, CameraPose):
            raise TypeError("expected a CameraPose in each (pose, mask) pair")
        mask = np.asarray(mask, dtype=bool)
        if position is not None:
            translation += float(np.linalg.norm(pose.position - position))
        position = pose.position
        frames.append(FrameRecord(index, translation, pose, pose, mask))
        index += 1
    return frames, index, translation, position


class TargetLocalizer(BaseEstimator):
    """Localise static 3D targets from binary masks and camera poses.

    Parameters mirror the filter and tracker knobs; `camera` must be a
    CameraIntrinsics instance.  After fitting, `positions_` holds one row
    per active track and `covariances_` the matching 3x3 covariances.
    """

    def __init__(
        self,
        camera=None,
        n_particles=100_000,
        sd_init=1000.0,
        pred_noise_coeff=0.002,
        ref_distance_m=2000.0,
        tau_min_obs=5,
        theta_po_sd=1.0,
        theta_po_floor_px=20.0,
        n_dismiss=5,
        n_fuse=5,
        min_component_px=3,
        random_state=0,
    ):
        self.camera = camera
        self.n_particles = n_particles
        self.sd_init = sd_init
        self.pred_noise_coeff = pred_noise_coeff
        self.ref_distance_m = ref_distance_m
        self.tau_min_obs = tau_min_obs
        self.theta_po_sd = theta_po_sd
        self.theta_po_floor_px = theta_po_floor_px
        self.n_dismiss = n_dismiss
        self.n_fuse = n_fuse
        self.min_component_px = min_component_px
        self.random_state = random_state

    def _check_ready(self):
        if not isinstance(self.camera, CameraIntrinsics):
            raise ValueError("camera must be a CameraIntrinsics instance")

    def _make_tracker(self) -> MultiTargetTracker:
        filter_params = FilterParams(
            n_particles=self.n_particles,
            sd_init=self.sd_init,
            tau_min_obs=max(self.tau_min_obs, 2),
            pred_noise_coeff=self.pred_noise_coeff,
            ref_distance_m=self.ref_distance_m,
        )
        tracker_params = TrackerParams(
            theta_po_sd=self.theta_po_sd,
            theta_po_floor_px=self.theta_po_floor_px,
            n_dismiss=self.n_dismiss,
            n_fuse=self.n_fuse,
            tau_min_obs=self.tau_min_obs,
            min_component_px=self.min_component_px,
        )
        return MultiTargetTracker(self.camera, filter_params, tracker_params)

    def fit(self, X, y=None):
        """Consume a frame sequence from scratch."""
        self._check_ready()
        self.tracker_ = self._make_tracker()
        self.n_frames_ = 0
        self._translation = 0.0
        self._position = None
        return self.partial_fit(X)

    def partial_fit(self, X, y=None):
        """Consume more frames, keeping tracker state."""
        self._check_ready()
        if not hasattr(self, "tracker_"):
            return self.fit(X)
        frames, self.n_frames_, self._translation, self._position = _as_frame_records(
            X, self.n_frames_, self._translation, self._position
        )
        seed = int(self.random_state or 0)
        for frame in frames:
            if frame.mask.shape != (self.camera.height, self.camera.width):
                raise ValueError(
                    f"mask shape {frame.mask.shape} does not match camera "
                    f"({self.camera.height}, {self.camera.width})"
                )
            self.tracker_.update(frame, lambda tid: track_stream(seed, frame.index, tid))
        self._refresh_estimates()
        return self

    def _refresh_estimates(self):
        actives = self.tracker_.active_tracks()
        summaries = [summarize(t.particles) for t in actives]
        self.track_ids_ = np.array([t.id for t in actives], dtype=int)
        self.positions_ = (
            np.array([s.mean for s in summaries]) if summaries else np.zeros((0, 3))
        )
        self.covariances_ = (
            np.array([s.covariance for s in summaries]) if summaries else np.zeros((0, 3, 3))
        )
        self.n_tracks_ = len(actives)

    def predict(self, X=None):
        """Estimated target positions, optionally consuming more frames first."""
        if not hasattr(self, "tracker_"):
            if X is None:
                raise NotFittedError("TargetLocalizer is not fitted yet")
            self.fit(X)
        elif X is not None:
            self.partial_fit(X)
        return self.positions_.copy()

    def fit_predict(self, X, y=None):
        return self.fit(X).positions_.copy()


class SobelSegmenter(TransformerMixin, BaseEstimator):
    """Stateless transformer: grayscale frames to binary masks via
    sobel -> threshold -> erode -> dilate."""

    def __init__(self, threshold=64, erode_iterations=1, dilate_iterations=2):
        self.threshold = threshold
        self.erode_iterations = erode_iterations
        self.dilate_iterations = dilate_iterations

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        """X: an iterable of 2-D uint8 arrays, or one (n, H, W) array.
        Returns masks in the same container shape."""
        if isinstance(X, np.ndarray) and X.ndim == 3:
            return np.stack([self._segment(img) for img in X])
        return [self._segment(img) for img in X]

    def _segment(self, image):
        img = np.asarray(image)
        if img.ndim != 2:
            raise ValueError("each frame must be a 2-D grayscale array")
        return segment_image(
            img,
            sobel_threshold=self.threshold,
            erode_iterations=self.erode_iterations,
            dilate_iterations=self.dilate_iterations,
        )
