"""Rigid-body types and exact geometric primitives.

Conventions
-----------
* Camera extrinsics ``(R, T)`` map world points into the camera frame,
  ``x_cam = R @ x_world + T``.  The camera optical center is ``-R.T @ T``.
* Camera coordinates are y-down with z along the viewing direction.
* Root orientations are axis-angle vectors.  Applying a rotation to an
  orientation means composing rotation matrices, then converting back.
* A plane ``(n, b)`` holds the points ``x`` with ``n @ x + b == 0``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation as _Rot

from scalecal import kernels

PARALLEL_TOL = 1e-9
UNIT_TOL = 1e-9
ORTHO_TOL = 1e-9


def as_vec3(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {np.shape(v)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    return arr


def as_rotation(m, name: str = "rotation") -> np.ndarray:
    """Validate a 3x3 rotation matrix (orthonormal, det = +1)."""
    R = np.asarray(m, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValueError(f"{name} must be 3x3, got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise ValueError(f"{name} must be finite")
    if np.abs(R.T @ R - np.eye(3)).max() > ORTHO_TOL or abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
        raise ValueError(f"{name} is not a proper rotation matrix")
    return R


def rotvec_to_matrix(rotvec) -> np.ndarray:
    return _Rot.from_rotvec(np.asarray(rotvec, dtype=np.float64)).as_matrix()


def matrix_to_rotvec(R) -> np.ndarray:
    return _Rot.from_matrix(np.asarray(R, dtype=np.float64)).as_rotvec()


def quat_xyzw_to_matrix(q) -> np.ndarray:
    return _Rot.from_quat(np.asarray(q, dtype=np.float64)).as_matrix()


def matrix_to_quat_xyzw(R) -> np.ndarray:
    return _Rot.from_matrix(np.asarray(R, dtype=np.float64)).as_quat()


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    return rotvec_to_matrix(axis / np.linalg.norm(axis) * angle)


class LengthMismatch(ValueError):
    """Paired sequences differ in length or timestamps."""


class ScaleStatus(str, enum.Enum):
    METRIC = "Metric"
    UNKNOWN = "UnknownScale"


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera extrinsics of one frame."""

    rotation: np.ndarray
    translation: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rotation", as_rotation(self.rotation))
        object.__setattr__(self, "translation", as_vec3(self.translation, "translation"))
        if not np.isfinite(self.timestamp):
            raise ValueError("timestamp must be finite")

    @property
    def center(self) -> np.ndarray:
        return camera_center(self)


@dataclass
class Trajectory:
    """Per-frame camera extrinsics stored as stacked arrays.

    ``rotations`` is ``(T, 3, 3)``, ``translations`` ``(T, 3)`` and
    ``timestamps`` ``(T,)``; indexing yields :class:`CameraPose`.
    """

    timestamps: np.ndarray
    rotations: np.ndarray
    translations: np.ndarray
    scale_status: ScaleStatus = ScaleStatus.UNKNOWN

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
        self.rotations = np.asarray(self.rotations, dtype=np.float64).reshape(-1, 3, 3)
        self.translations = np.asarray(self.translations, dtype=np.float64).reshape(-1, 3)
        self.scale_status = ScaleStatus(self.scale_status)
        n = len(self.timestamps)
        if n == 0:
            raise ValueError("trajectory must contain at least one pose")
        if len(self.rotations) != n or len(self.translations) != n:
            raise ValueError("timestamps, rotations and translations differ in length")
        if not (np.all(np.isfinite(self.timestamps)) and np.all(np.isfinite(self.translations))):
            raise ValueError("trajectory contains non-finite values")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")
        RtR = np.einsum("nji,njk->nik", self.rotations, self.rotations)
        if np.abs(RtR - np.eye(3)).max() > ORTHO_TOL or np.abs(np.linalg.det(self.rotations) - 1).max() > ORTHO_TOL:
            raise ValueError("trajectory contains an invalid rotation")

    @classmethod
    def from_poses(cls, poses: Sequence[CameraPose], scale_status=ScaleStatus.UNKNOWN) -> "Trajectory":
        return cls(
            timestamps=[p.timestamp for p in poses],
            rotations=[p.rotation for p in poses],
            translations=[p.translation for p in poses],
            scale_status=scale_status,
        )

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, i: int) -> CameraPose:
        return CameraPose(self.rotations[i], self.translations[i], float(self.timestamps[i]))

    @property
    def poses(self) -> list:
        return [self[i] for i in range(len(self))]

    def camera_centers(self) -> np.ndarray:
        return -np.einsum("nji,nj->ni", self.rotations, self.translations)


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", as_vec3(self.origin, "ray origin"))
        d = as_vec3(self.direction, "ray direction")
        if abs(np.linalg.norm(d) - 1.0) > UNIT_TOL:
            raise ValueError("ray direction must be unit length")
        object.__setattr__(self, "direction", d)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class Plane:
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = as_vec3(self.normal, "plane normal")
        if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
            raise ValueError("plane normal must be unit length")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))
        if not np.isfinite(self.offset):
            raise ValueError("plane offset must be finite")

    @classmethod
    def from_point_normal(cls, point, normal) -> "Plane":
        n = np.asarray(normal, dtype=np.float64)
        n = n / np.linalg.norm(n)
        return cls(n, -float(n @ np.asarray(point, dtype=np.float64)))

    def signed_distance(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.normal + self.offset

    def flipped(self) -> "Plane":
        return Plane(-self.normal, -self.offset)


@dataclass
class PointCloud:
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite points")
        self.points = pts

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class SimilarityTransform:
    """``x -> scale * rotation @ x + translation``."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError("similarity scale must be positive")
        object.__setattr__(self, "rotation", as_rotation(self.rotation))
        object.__setattr__(self, "translation", as_vec3(self.translation, "translation"))

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return self.scale * pts @ self.rotation.T + self.translation

    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.scale * self.rotation
        M[:3, 3] = self.translation
        return M


def camera_center(pose: CameraPose) -> np.ndarray:
    return -pose.rotation.T @ pose.translation


def camera_to_world_point(x_cam, pose: CameraPose) -> np.ndarray:
    """``R.T @ (x_cam - T)``; also accepts an ``(N, 3)`` array."""
    x = np.asarray(x_cam, dtype=np.float64)
    return (x - pose.translation) @ pose.rotation


def world_to_camera_point(x_world, pose: CameraPose) -> np.ndarray:
    x = np.asarray(x_world, dtype=np.float64)
    return x @ pose.rotation.T + pose.translation


def world_to_camera_root(phi, gamma, pose: CameraPose) -> Tuple[np.ndarray, np.ndarray]:
    """Map a world root ``(orientation, translation)`` into camera coordinates."""
    R = pose.rotation
    psi = matrix_to_rotvec(R @ rotvec_to_matrix(as_vec3(phi, "phi")))
    tau = R @ as_vec3(gamma, "gamma") + pose.translation
    return psi, tau


def camera_to_world_root(psi, tau, pose: CameraPose) -> Tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`world_to_camera_root` for the same pose."""
    R = pose.rotation
    phi = matrix_to_rotvec(R.T @ rotvec_to_matrix(as_vec3(psi, "psi")))
    gamma = R.T @ (as_vec3(tau, "tau") - pose.translation)
    return phi, gamma


def ray_plane_intersection(ray: Ray, plane: Plane) -> Optional[Tuple[np.ndarray, float]]:
    """Intersect a ray with a plane.

    Returns ``(point, t)`` with ``point = origin + t * direction``, or ``None``
    when the ray is parallel to the plane (``|n . d| < 1e-9``) or the hit lies
    at ``t <= 0``.
    """
    denom = float(plane.normal @ ray.direction)
    if abs(denom) < PARALLEL_TOL:
        return None
    t = -(plane.offset + float(plane.normal @ ray.origin)) / denom
    if not t > 0:
        return None
    return ray.origin + t * ray.direction, t


def nearest_point_to_ray(cloud, ray: Ray) -> Optional[Tuple[int, float, float]]:
    """Cloud point closest to the ray line among points in front of the origin.

    Returns ``(index, perpendicular_distance, along_distance)``; points with
    ``along_distance <= 0`` are never candidates.  ``None`` when no point is
    in front of the origin.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.ascontiguousarray(cloud, dtype=np.float64)
    if len(pts) == 0:
        return None
    return kernels.nearest_to_ray(pts, ray.origin, ray.direction)


def _min_rotation(v: np.ndarray, u: np.ndarray) -> np.ndarray:
    # smallest-angle rotation taking unit v onto unit u
    c = float(v @ u)
    k = np.cross(v, u)
    s = np.linalg.norm(k)
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        helper = np.eye(3)[np.argmin(np.abs(v))]
        a = np.cross(v, helper)
        a /= np.linalg.norm(a)
        return 2.0 * np.outer(a, a) - np.eye(3)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + K + K @ K * ((1.0 - c) / (s * s))


def umeyama_align(source, target, with_scale: bool = True) -> SimilarityTransform:
    """Least-squares similarity (or rigid) transform taking ``source`` onto ``target``.

    Minimizes ``sum ||s R x_i + t - y_i||^2``.  When the cross-covariance has
    rank one (collinear or two-point inputs) the rotation is the smallest one
    aligning the two principal directions, i.e. the minimizer nearest the
    identity; with rank zero it is the identity.
    """
    src = np.asarray(source, dtype=np.float64)
    dst = np.asarray(target, dtype=np.float64)
    if src.shape != dst.shape:
        raise ValueError(f"size mismatch: {src.shape} vs {dst.shape}")
    if src.ndim != 2 or src.shape[1] != 3:
        raise ValueError("expected (N, 3) point arrays")
    n = len(src)
    if n < 2:
        raise ValueError("need at least 2 point pairs")

    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    xs = src - mu_s
    xd = dst - mu_d
    var_s = float((xs * xs).sum()) / n
    cov = xd.T @ xs / n
    U, S, Vt = np.linalg.svd(cov)

    if S[0] <= 1e-300:
        R, trace = np.eye(3), 0.0
    elif S[1] <= 1e-10 * S[0]:
        R, trace = _min_rotation(Vt[0], U[:, 0]), float(S[0])
    else:
        D = np.ones(3)
        if np.linalg.det(U) * np.linalg.det(Vt) < 0:
            D[2] = -1.0
        R = (U * D) @ Vt
        trace = float(S @ D)

    if with_scale and var_s > 0:
        scale = trace / var_s
        if not scale > 0:
            raise ValueError("degenerate target: similarity scale collapses to zero")
    else:
        scale = 1.0
    t = mu_d - scale * R @ mu_s
    return SimilarityTransform(scale, R, t)
