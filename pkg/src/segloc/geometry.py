"""Pinhole camera geometry: projection, ray back-projection, two-ray
triangulation, and camera-pose noise injection.

Coordinate conventions used throughout the package:

* World frame: right-handed, x right, y down, z forward, in metres.  The
  identity camera rotation looks along +z, and the image row index grows
  with +y, so camera and image axes are sign-compatible.
* Pixel frame: u is the column index, v the row index.  Coordinates are
  real-valued until discretised; integer pixel (u, v) owns the half-open
  cell [u, u+1) x [v, v+1), so discretisation is a component-wise floor.

World points are plain float64 arrays of shape (3,), pixel points of
shape (2,).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParallelRaysError

BEHIND_CAMERA_EPS = 1e-6  # camera-frame depth at or below this counts as behind
ORTHONORMAL_TOL = 1e-9
PARALLEL_TOL = 1e-9
UNIT_TOL = 1e-12


@dataclass
class CameraIntrinsics:
    """Focal lengths and principal point in pixels, plus sensor size."""

    f_x: float
    f_y: float
    c_x: float
    c_y: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.f_x > 0 and self.f_y > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.c_x <= self.width and 0 <= self.c_y <= self.height):
            raise ValueError("principal point must lie within the sensor")

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.f_x, 0.0, self.c_x],
                [0.0, self.f_y, self.c_y],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass
class CameraPose:
    """World-to-camera rotation plus the camera centre in world metres.

    The extrinsic translation of the projection matrix is t = -R @ position.
    """

    rotation: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.position = np.asarray(self.position, dtype=float)
        if self.rotation.shape != (3, 3):
            raise ValueError("rotation must be a 3x3 matrix")
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err > ORTHONORMAL_TOL:
            raise ValueError(f"rotation is not orthonormal (max error {err:.2e})")
        det = np.linalg.det(self.rotation)
        if abs(det - 1.0) > ORTHONORMAL_TOL:
            raise ValueError(f"rotation determinant is {det}, expected 1")

    @property
    def translation(self) -> np.ndarray:
        """Extrinsic translation t = -R @ c."""
        return -self.rotation @ self.position


@dataclass
class PoseNoiseConfig:
    """Per-axis bounds for pose perturbation: rotation in degrees, translation in metres."""

    max_rot_deg: float = 0.0
    max_trans_m: float = 0.0

    def __post_init__(self):
        if self.max_rot_deg < 0 or self.max_trans_m < 0:
            raise ValueError("noise bounds must be non-negative")


@dataclass
class Ray:
    """Half-line from `origin` along the unit vector `direction`."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.direction = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(self.direction) - 1.0) > UNIT_TOL:
            raise ValueError("direction must be a unit vector")


def rot_x(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle_rad: float) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_from_rpy_deg(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """World-to-camera rotation from roll/pitch/yaw in degrees.

    Intrinsic composition yaw -> pitch -> roll applied to the camera that
    looks along +z: yaw about the (down-pointing) y axis, pitch about x
    with positive pitch tilting the optical axis downward (+y), roll about
    the optical z axis.
    """
    r, p, y = np.radians([roll, pitch, yaw])
    cam_to_world = rot_y(y) @ rot_x(-p) @ rot_z(r)
    return cam_to_world.T


def project_points(
    points: np.ndarray, intrinsics: CameraIntrinsics, pose: CameraPose
) -> tuple[np.ndarray, np.ndarray]:
    """Project an (N, 3) array of world points.

    Returns (pixels, in_front) where pixels is (N, 2) real-valued and
    in_front flags points strictly in front of the camera plane; pixel
    rows for points behind the camera are undefined.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cam = (pts - pose.position) @ pose.rotation.T
    z = cam[:, 2]
    in_front = z > BEHIND_CAMERA_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intrinsics.f_x * cam[:, 0] / z + intrinsics.c_x
        v = intrinsics.f_y * cam[:, 1] / z + intrinsics.c_y
    return np.column_stack([u, v]), in_front


def project_point(
    point: np.ndarray, intrinsics: CameraIntrinsics, pose: CameraPose
) -> np.ndarray | None:
    """Project one world point; None when it is at or behind the camera plane.

    Frame bounds are not checked; callers decide what to do with
    projections that fall outside the sensor.
    """
    pix, in_front = project_points(np.asarray(point, dtype=float)[None, :], intrinsics, pose)
    if not in_front[0]:
        return None
    return pix[0]


def discretise(pixel: np.ndarray) -> np.ndarray:
    """Component-wise floor to the containing pixel cell (works on (2,) or (N, 2))."""
    return np.floor(np.asarray(pixel, dtype=float)).astype(np.int64)


def back_project_ray(pixel: np.ndarray, intrinsics: CameraIntrinsics, pose: CameraPose) -> Ray:
    """Ray from the camera centre through the given (real-valued) pixel."""
    u, v = np.asarray(pixel, dtype=float)
    d_cam = np.array(
        [(u - intrinsics.c_x) / intrinsics.f_x, (v - intrinsics.c_y) / intrinsics.f_y, 1.0]
    )
    d_world = pose.rotation.T @ d_cam
    return Ray(pose.position.copy(), d_world / np.linalg.norm(d_world))


def ray_midpoint(r1: Ray, r2: Ray) -> np.ndarray:
    """Midpoint of the closest points of two infinite lines.

    Solves the 2x2 normal equations of min_{t,s} ||(o1 + t*d1) - (o2 + s*d2)||^2
    in closed form.  Raises ParallelRaysError when |d1 . d2| >= 1 - 1e-9,
    which signals that initialisation must be retried with a later frame.
    """
    b = float(r1.direction @ r2.direction)
    if abs(b) >= 1.0 - PARALLEL_TOL:
        raise ParallelRaysError("rays are parallel within tolerance")
    w = r1.origin - r2.origin
    e1 = float(r1.direction @ w)
    e2 = float(r2.direction @ w)
    denom = 1.0 - b * b
    t = (b * e2 - e1) / denom
    s = (e2 - b * e1) / denom
    p1 = r1.origin + t * r1.direction
    p2 = r2.origin + s * r2.direction
    return 0.5 * (p1 + p2)


def perturb_pose(pose: CameraPose, cfg: PoseNoiseConfig, rng: np.random.Generator) -> CameraPose:
    """Inject bounded uniform noise into a pose.

    The rotation becomes N_rx @ N_ry @ N_rz @ R with each single-axis angle
    drawn uniformly from [-max_rot_deg, +max_rot_deg]; the camera centre is
    shifted per axis by a uniform draw from [-max_trans_m, +max_trans_m].
    Draw order is fixed (three angles, then three offsets) so streams stay
    reproducible.
    """
    max_rot = np.radians(cfg.max_rot_deg)
    ax, ay, az = rng.uniform(-max_rot, max_rot, size=3)
    offset = rng.uniform(-cfg.max_trans_m, cfg.max_trans_m, size=3)
    rotation = rot_x(ax) @ rot_y(ay) @ rot_z(az) @ pose.rotation
    return CameraPose(rotation, pose.position + offset)
