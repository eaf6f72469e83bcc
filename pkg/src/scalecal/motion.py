"""Human motion containers and composition of world-frame motion."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from scalecal.geometry import (
    LengthMismatch,
    ScaleStatus,
    Trajectory,
    matrix_to_rotvec,
    rotvec_to_matrix,
)

N_JOINTS = 24

# SMPL 24-joint ordering
JOINT_NAMES = (
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder",
    "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
    "left_hand", "right_hand",
)
PELVIS = 0
HEAD = 15
FEET = (10, 11)
HANDS = (20, 21, 22, 23)


@dataclass(frozen=True)
class HumanFrame:
    joints: np.ndarray
    root_orient: np.ndarray
    root_trans: np.ndarray
    timestamp: float
    pose_params: Optional[list] = None
    shape_params: Optional[list] = None


def _check_motion_arrays(timestamps, joints, root_orient, root_trans):
    n = len(timestamps)
    if joints.shape != (n, N_JOINTS, 3):
        raise ValueError(f"joints must have shape (T, {N_JOINTS}, 3), got {joints.shape}")
    if root_orient.shape != (n, 3) or root_trans.shape != (n, 3):
        raise ValueError("root_orient/root_trans must have shape (T, 3)")
    if not np.all(np.isfinite(root_trans)) or not np.all(np.isfinite(timestamps)):
        raise ValueError("root translations and timestamps must be finite")
    if np.any(np.diff(timestamps) <= 0):
        raise ValueError("timestamps must be strictly increasing")


@dataclass
class MotionSequence:
    """Camera-space human motion: joints ``(T, 24, 3)`` in meters, root
    orientation (axis-angle) and translation per frame.

    ``theta``/``beta`` hold per-frame pose/shape payloads that are carried
    through untouched (``None`` when absent).
    """

    timestamps: np.ndarray
    joints: np.ndarray
    root_orient: np.ndarray
    root_trans: np.ndarray
    theta: List[Optional[list]] = field(default_factory=list)
    beta: List[Optional[list]] = field(default_factory=list)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
        self.joints = np.asarray(self.joints, dtype=np.float64)
        self.root_orient = np.asarray(self.root_orient, dtype=np.float64).reshape(-1, 3)
        self.root_trans = np.asarray(self.root_trans, dtype=np.float64).reshape(-1, 3)
        _check_motion_arrays(self.timestamps, self.joints, self.root_orient, self.root_trans)
        n = len(self.timestamps)
        self.theta = list(self.theta) if self.theta else [None] * n
        self.beta = list(self.beta) if self.beta else [None] * n
        if len(self.theta) != n or len(self.beta) != n:
            raise ValueError("theta/beta payload lists must match the frame count")

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, i: int) -> HumanFrame:
        return HumanFrame(
            self.joints[i], self.root_orient[i], self.root_trans[i],
            float(self.timestamps[i]), self.theta[i], self.beta[i],
        )

    @classmethod
    def from_frames(cls, frames) -> "MotionSequence":
        frames = list(frames)
        return cls(
            timestamps=[f.timestamp for f in frames],
            joints=np.stack([np.asarray(f.joints, dtype=np.float64) for f in frames]),
            root_orient=[f.root_orient for f in frames],
            root_trans=[f.root_trans for f in frames],
            theta=[f.pose_params for f in frames],
            beta=[f.shape_params for f in frames],
        )


@dataclass
class GlobalMotion:
    """World-frame human motion; same layout as :class:`MotionSequence`."""

    timestamps: np.ndarray
    joints: np.ndarray
    root_orient: np.ndarray
    root_trans: np.ndarray
    theta: List[Optional[list]] = field(default_factory=list)
    beta: List[Optional[list]] = field(default_factory=list)
    scale_used: float = 1.0

    __post_init__ = MotionSequence.__post_init__
    __len__ = MotionSequence.__len__

    @property
    def roots(self) -> np.ndarray:
        return self.root_trans


def check_aligned(motion, trajectory: Trajectory) -> None:
    if len(motion) != len(trajectory) or not np.array_equal(motion.timestamps, trajectory.timestamps):
        raise LengthMismatch(
            f"motion ({len(motion)} frames) and trajectory ({len(trajectory)} poses) "
            "timestamps do not match one-to-one"
        )


def apply_scale(trajectory: Trajectory, s_bar: float) -> Trajectory:
    """Metric trajectory ``{R_t, s_bar * T'_t}`` from an up-to-scale one."""
    if not (np.isfinite(s_bar) and s_bar > 0):
        raise ValueError(f"scale must be positive, got {s_bar}")
    if trajectory.scale_status is not ScaleStatus.UNKNOWN:
        raise ValueError("trajectory is already metric")
    return replace(
        trajectory,
        translations=trajectory.translations * s_bar,
        rotations=trajectory.rotations.copy(),
        scale_status=ScaleStatus.METRIC,
    )


def compose_global_motion(motion: MotionSequence, metric_trajectory: Trajectory,
                          s_bar: float = 1.0) -> GlobalMotion:
    """Move camera-space motion into the world frame of ``metric_trajectory``.

    Root orientation becomes ``R.T @ Rot(psi)``, root translation
    ``R.T (tau - T)``, and every joint is mapped pointwise the same way.
    ``s_bar`` is only recorded; the trajectory must already carry it.
    """
    if metric_trajectory.scale_status is not ScaleStatus.METRIC:
        raise ValueError("compose_global_motion needs a metric trajectory")
    check_aligned(motion, metric_trajectory)
    R = metric_trajectory.rotations
    T = metric_trajectory.translations
    root_trans = np.einsum("nji,nj->ni", R, motion.root_trans - T)
    joints = np.einsum("nji,nkj->nki", R, motion.joints - T[:, None, :])
    root_orient = matrix_to_rotvec(np.transpose(R, (0, 2, 1)) @ rotvec_to_matrix(motion.root_orient))
    return GlobalMotion(
        timestamps=motion.timestamps.copy(),
        joints=joints,
        root_orient=np.asarray(root_orient).reshape(-1, 3),
        root_trans=root_trans,
        theta=list(motion.theta),
        beta=list(motion.beta),
        scale_used=float(s_bar),
    )


def project_to_camera(global_motion: GlobalMotion, metric_trajectory: Trajectory) -> MotionSequence:
    """Inverse of :func:`compose_global_motion`."""
    check_aligned(global_motion, metric_trajectory)
    R = metric_trajectory.rotations
    T = metric_trajectory.translations
    root_trans = np.einsum("nij,nj->ni", R, global_motion.root_trans) + T
    joints = np.einsum("nij,nkj->nki", R, global_motion.joints) + T[:, None, :]
    root_orient = matrix_to_rotvec(R @ rotvec_to_matrix(global_motion.root_orient))
    return MotionSequence(
        timestamps=global_motion.timestamps.copy(),
        joints=joints,
        root_orient=np.asarray(root_orient).reshape(-1, 3),
        root_trans=root_trans,
        theta=list(global_motion.theta),
        beta=list(global_motion.beta),
    )
