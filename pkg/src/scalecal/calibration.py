"""Per-frame and per-sequence metric scale estimation.

For each frame the lowest joint in the y-down camera frame is taken as the
human-scene contact.  Its distance to the camera, as predicted by the human
model, is metric; the distance from the SLAM camera center to the scene
point hit by the ray toward that joint is in SLAM units.  Their ratio is the
frame's scale and the sequence scale is the median over frames.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from scalecal import kernels
from scalecal.geometry import (
    PARALLEL_TOL,
    CameraPose,
    Plane,
    PointCloud,
    Ray,
    ScaleStatus,
    Trajectory,
    camera_center,
    camera_to_world_point,
)
from scalecal.ground_plane import GroundFit, NormalMode, PlaneFitConfig, PlaneFitError, fit_ground_plane
from scalecal.motion import N_JOINTS, HumanFrame, MotionSequence, check_aligned


class ReferenceKind(str, enum.Enum):
    CLOUD = "CloudIntersection"
    PLANE = "PlaneIntersection"


class RejectReason(str, enum.Enum):
    NO_INTERSECTION = "NoIntersection"
    PARALLEL_RAY = "ParallelRay"
    BEHIND_CAMERA = "BehindCamera"
    TOO_CLOSE = "TooClose"
    NON_FINITE = "NonFiniteJoint"


class CalibrationFailed(RuntimeError):
    def __init__(self, message: str, result: "CalibrationResult" = None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class ContactJoint:
    joint_index: int
    camera_position: np.ndarray
    world_position: np.ndarray
    absolute_depth: float


@dataclass(frozen=True)
class FrameScale:
    frame_index: int
    scale: float
    reference_kind: ReferenceKind
    reference_point: np.ndarray
    relative_depth: float
    absolute_depth: float
    contact: ContactJoint
    perp_distance: float = 0.0


@dataclass(frozen=True)
class Rejection:
    frame_index: int
    reason: RejectReason
    detail: str = ""
    joint_index: Optional[int] = None


@dataclass(frozen=True)
class CalibrationConfig:
    """Thresholds for scale estimation.

    ``max_perp_distance`` is in meters: a cloud hit is accepted when its
    distance to the ray, converted to meters with the scale that hit implies,
    is at most this value.  ``normal_mode=None`` disables the ground-plane
    fallback.  ``reference_joints`` replaces the lowest-joint rule with fixed
    joint indices (each contributes one scale per frame).
    """

    max_perp_distance: float = 0.25
    plane_bin_height: float = 0.10
    plane_min_bin_fraction: float = 0.05
    ransac_iters: int = 1000
    ransac_tol: float = 0.05
    normal_mode: Optional[NormalMode] = NormalMode.CONTACTS
    min_valid_frames: int = 3
    min_contact_depth: float = 0.1
    reference_joints: Optional[Tuple[int, ...]] = None
    seed: int = 0

    def __post_init__(self):
        for name in ("max_perp_distance", "plane_bin_height", "ransac_tol", "min_contact_depth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.ransac_iters < 1 or self.min_valid_frames < 1:
            raise ValueError("ransac_iters and min_valid_frames must be >= 1")
        if self.normal_mode is not None:
            object.__setattr__(self, "normal_mode", NormalMode(self.normal_mode))
        if self.reference_joints is not None:
            joints = tuple(int(j) for j in self.reference_joints)
            if not joints or any(not 0 <= j < N_JOINTS for j in joints):
                raise ValueError(f"reference joints must lie in [0, {N_JOINTS})")
            object.__setattr__(self, "reference_joints", joints)

    def plane_config(self) -> PlaneFitConfig:
        return PlaneFitConfig(self.plane_bin_height, self.plane_min_bin_fraction, self.ransac_iters, self.ransac_tol)


@dataclass
class CalibrationResult:
    sequence_scale: float
    per_frame: List[FrameScale]
    rejected_frames: List[Rejection]
    plane: Optional[Plane] = None
    scale_stddev: float = 0.0
    ground_fit: Optional[GroundFit] = None
    plane_error: Optional[str] = None

    @property
    def scales(self) -> np.ndarray:
        return np.array([f.scale for f in self.per_frame])

    def count(self, kind: ReferenceKind) -> int:
        return sum(f.reference_kind is kind for f in self.per_frame)


def contact_from_joint(frame: HumanFrame, pose: CameraPose, joint_index: int) -> ContactJoint:
    J = np.asarray(frame.joints[joint_index], dtype=np.float64)
    if not np.all(np.isfinite(J)):
        raise ValueError(f"joint {joint_index} has non-finite coordinates")
    return ContactJoint(int(joint_index), J, camera_to_world_point(J, pose), float(np.linalg.norm(J)))


def select_contact_joint(frame: HumanFrame, pose: CameraPose) -> ContactJoint:
    """Lowest joint of the y-down camera frame (largest y; first index on ties)."""
    joints = np.asarray(frame.joints, dtype=np.float64)
    return contact_from_joint(frame, pose, int(np.argmax(joints[:, 1])))


def build_reference_ray(contact: ContactJoint, pose: CameraPose) -> Ray:
    o = camera_center(pose)
    v = contact.world_position - o
    length = float(np.linalg.norm(v))
    if length < 1e-9:
        raise ValueError("contact joint coincides with the camera center")
    return Ray(o, v / length)


def _cloud_scale(frame_index, contact, ray, cloud_pts, hit, cfg) -> Union[FrameScale, Rejection]:
    if hit is None:
        return Rejection(frame_index, RejectReason.NO_INTERSECTION, "no cloud point in front of the camera",
                         contact.joint_index)
    idx, perp, _ = hit
    p = cloud_pts[idx]
    d_rel = float(np.linalg.norm(p - ray.origin))
    scale = contact.absolute_depth / d_rel
    if perp * scale > cfg.max_perp_distance:
        return Rejection(frame_index, RejectReason.NO_INTERSECTION,
                         f"nearest point is {perp * scale:.3f} m from the ray", contact.joint_index)
    return FrameScale(frame_index, scale, ReferenceKind.CLOUD, p.copy(), d_rel, contact.absolute_depth,
                      contact, float(perp))


def _too_close(frame_index, contact, cfg) -> Optional[Rejection]:
    if contact.absolute_depth <= cfg.min_contact_depth:
        return Rejection(frame_index, RejectReason.TOO_CLOSE,
                         f"contact depth {contact.absolute_depth:.3f} m", contact.joint_index)
    return None


def frame_scale_from_cloud(frame: HumanFrame, pose: CameraPose, cloud, cfg: CalibrationConfig = CalibrationConfig(),
                           frame_index: int = 0, contact: Optional[ContactJoint] = None):
    """Scale of one frame from the cloud point nearest the contact ray.

    Returns a :class:`FrameScale`, or a :class:`Rejection` with reason
    ``NoIntersection`` when no point is close enough to the ray.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.ascontiguousarray(cloud, dtype=np.float64)
    if len(pts) == 0:
        raise ValueError("point cloud is empty")
    contact = contact or select_contact_joint(frame, pose)
    rejected = _too_close(frame_index, contact, cfg)
    if rejected:
        return rejected
    ray = build_reference_ray(contact, pose)
    hit = kernels.nearest_to_ray(pts, ray.origin, ray.direction)
    return _cloud_scale(frame_index, contact, ray, pts, hit, cfg)


def frame_scale_from_plane(frame: HumanFrame, pose: CameraPose, plane: Plane, frame_index: int = 0,
                           contact: Optional[ContactJoint] = None, cfg: CalibrationConfig = CalibrationConfig()):
    """Scale of one frame from the hit of the contact ray with ``plane``."""
    contact = contact or select_contact_joint(frame, pose)
    rejected = _too_close(frame_index, contact, cfg)
    if rejected:
        return rejected
    ray = build_reference_ray(contact, pose)
    denom = float(plane.normal @ ray.direction)
    if abs(denom) < PARALLEL_TOL:
        return Rejection(frame_index, RejectReason.PARALLEL_RAY, "", contact.joint_index)
    t = -(plane.offset + float(plane.normal @ ray.origin)) / denom
    if not t > 0:
        return Rejection(frame_index, RejectReason.BEHIND_CAMERA, f"t* = {t:.4g}", contact.joint_index)
    p = ray.origin + t * ray.direction
    d_rel = float(np.linalg.norm(p - ray.origin))
    return FrameScale(frame_index, contact.absolute_depth / d_rel, ReferenceKind.PLANE, p, d_rel,
                      contact.absolute_depth, contact)


def calibrate_sequence(motion: MotionSequence, trajectory: Trajectory, cloud,
                       cfg: CalibrationConfig = CalibrationConfig(), plane: Optional[Plane] = None) -> CalibrationResult:
    """Estimate the sequence scale that maps SLAM units to meters.

    Every frame is first tried against the cloud.  Frames rejected for lack
    of a cloud intersection are retried against a ground plane (``plane``
    when given, else fitted with ``cfg.normal_mode``).  The sequence scale is
    the median of all accepted per-frame scales.

    Raises :class:`CalibrationFailed` when fewer than ``cfg.min_valid_frames``
    scales are accepted.
    """
    check_aligned(motion, trajectory)
    if trajectory.scale_status is not ScaleStatus.UNKNOWN:
        raise ValueError("calibration expects an up-to-scale trajectory")
    pts = cloud.points if isinstance(cloud, PointCloud) else np.ascontiguousarray(cloud, dtype=np.float64).reshape(-1, 3)

    poses = trajectory.poses
    rejected: List[Rejection] = []
    candidates = []  # (frame_index, pose, contact, ray)
    contacts_world = []
    for t, pose in enumerate(poses):
        frame = motion[t]
        if cfg.reference_joints is None:
            joint_ids = [int(np.argmax(frame.joints[:, 1]))]
        else:
            joint_ids = cfg.reference_joints
        for j in joint_ids:
            try:
                contact = contact_from_joint(frame, pose, j)
            except ValueError as exc:
                rejected.append(Rejection(t, RejectReason.NON_FINITE, str(exc), j))
                continue
            too_close = _too_close(t, contact, cfg)
            if too_close:
                rejected.append(too_close)
                continue
            candidates.append((t, pose, contact, build_reference_ray(contact, pose)))
            contacts_world.append(contact.world_position)

    accepted: List[FrameScale] = []
    retry = []
    if candidates and len(pts):
        origins = np.array([c[3].origin for c in candidates])
        dirs = np.array([c[3].direction for c in candidates])
        idx, perp, along = kernels.nearest_to_rays(pts, origins, dirs)
        for k, (t, pose, contact, ray) in enumerate(candidates):
            hit = (int(idx[k]), float(perp[k]), float(along[k])) if idx[k] >= 0 else None
            out = _cloud_scale(t, contact, ray, pts, hit, cfg)
            if isinstance(out, FrameScale):
                accepted.append(out)
            else:
                retry.append((out, t, pose, contact))
    else:
        retry = [(Rejection(t, RejectReason.NO_INTERSECTION, "empty cloud", c.joint_index), t, pose, c)
                 for t, pose, c, _ in candidates]

    ground_fit = None
    plane_error = None
    if retry and (plane is not None or cfg.normal_mode is not None):
        if plane is None:
            try:
                ground_fit = fit_ground_plane(contacts_world, pts, cfg.normal_mode, cfg.plane_config(),
                                              seed=cfg.seed, camera_centers=trajectory.camera_centers())
                plane = ground_fit.plane
            except (PlaneFitError, ValueError) as exc:
                plane_error = f"{type(exc).__name__}: {exc}"
        if plane is not None:
            still = []
            for rej, t, pose, contact in retry:
                out = frame_scale_from_plane(motion[t], pose, plane, t, contact, cfg)
                if isinstance(out, FrameScale):
                    accepted.append(out)
                else:
                    still.append((out, t, pose, contact))
            retry = still
    rejected.extend(r[0] for r in retry)
    rejected.sort(key=lambda r: r.frame_index)
    accepted.sort(key=lambda f: (f.frame_index, f.contact.joint_index))

    scales = np.array([f.scale for f in accepted])
    result = CalibrationResult(
        sequence_scale=float(np.median(scales)) if len(scales) else float("nan"),
        per_frame=accepted,
        rejected_frames=rejected,
        plane=plane,
        scale_stddev=float(np.std(scales)) if len(scales) else float("nan"),
        ground_fit=ground_fit,
        plane_error=plane_error,
    )
    if len(accepted) < cfg.min_valid_frames:
        raise CalibrationFailed(
            f"only {len(accepted)} frame scales accepted, need {cfg.min_valid_frames}"
            + (f" ({plane_error})" if plane_error else ""),
            result,
        )
    return result
