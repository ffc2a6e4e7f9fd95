import numpy as np
import pytest

from segloc import CameraIntrinsics, CameraPose


@pytest.fixture
def hd_camera():
    """The intrinsics used throughout the experiments (full HD, 90 deg HFOV)."""
    return CameraIntrinsics(1200.0, 1200.0, 960.0, 540.0, 1920, 1080)


@pytest.fixture
def small_camera():
    """A 64x64 camera for cheap pixel-level tests."""
    return CameraIntrinsics(64.0, 64.0, 32.0, 32.0, 64, 64)


@pytest.fixture
def identity_pose():
    return CameraPose(np.eye(3), np.zeros(3))
