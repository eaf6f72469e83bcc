"""Deterministic synthetic scenes with known metric scale.

Scenes are laid out in a level, y-down "scene" frame with the ground at
``y = 0``.  The world frame of every output is the first camera's frame, as
a monocular SLAM system would report it.  The SLAM gauge divides all world
translations and cloud coordinates by ``true_scale``.

Every joint that touches the ground is placed exactly at ``y = 0`` and, unless
contacts are cropped, a cloud point is added at its location, so noiseless
scenes reproduce ``true_scale`` exactly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from scalecal.geometry import (
    Plane,
    PointCloud,
    ScaleStatus,
    Trajectory,
    matrix_to_rotvec,
    rotvec_to_matrix,
)
from scalecal.motion import N_JOINTS, GlobalMotion, MotionSequence


class Subject(str, enum.Enum):
    WALKER = "walker"
    STATIONARY = "stationary"
    SKATER = "skater"
    HANDSTAND = "handstand"


class CameraPath(str, enum.Enum):
    ORBIT = "orbit"
    FOLLOW = "follow"
    STATIC = "static"


# (lateral to the right, height above ground, forward), meters
_STANDING = np.array([
    [0.00, 0.95, 0.00], [-0.09, 0.90, 0.00], [0.09, 0.90, 0.00], [0.00, 1.05, -0.01],
    [-0.10, 0.50, 0.02], [0.10, 0.50, 0.02], [0.00, 1.18, -0.01], [-0.10, 0.08, -0.03],
    [0.10, 0.08, -0.03], [0.00, 1.30, 0.00], [-0.11, 0.00, 0.10], [0.11, 0.00, 0.10],
    [0.00, 1.50, 0.00], [-0.07, 1.42, 0.00], [0.07, 1.42, 0.00], [0.00, 1.65, 0.03],
    [-0.18, 1.42, 0.00], [0.18, 1.42, 0.00], [-0.22, 1.15, 0.00], [0.22, 1.15, 0.00],
    [-0.24, 0.90, 0.02], [0.24, 0.90, 0.02], [-0.25, 0.82, 0.03], [0.25, 0.82, 0.03],
])

_HANDSTAND = np.array([
    [0.00, 1.22, 0.00], [-0.09, 1.28, 0.00], [0.09, 1.28, 0.00], [0.00, 1.10, 0.01],
    [-0.10, 1.70, -0.02], [0.10, 1.70, -0.02], [0.00, 0.98, 0.01], [-0.10, 2.10, 0.03],
    [0.10, 2.10, 0.03], [0.00, 0.85, 0.00], [-0.11, 2.18, -0.08], [0.11, 2.18, -0.08],
    [0.00, 0.68, 0.00], [-0.07, 0.62, 0.00], [0.07, 0.62, 0.00], [0.00, 0.45, 0.05],
    [-0.18, 0.60, 0.00], [0.18, 0.60, 0.00], [-0.21, 0.33, 0.02], [0.21, 0.33, 0.02],
    [-0.23, 0.07, 0.04], [0.23, 0.07, 0.04], [-0.24, 0.00, 0.10], [0.24, 0.00, 0.10],
])

_LEGS = ((10, 7, 4, 1, -1.0), (11, 8, 5, 2, 1.0))  # foot, ankle, knee, hip, side
_LEG_JOINTS = {j for leg in _LEGS for j in leg[:4]} - {1, 2}

_ROOM_HALF = 20.0
_WALL_HEIGHT = 3.0


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    n_frames: int = 300
    true_scale: float = 3.0
    subject: Subject = Subject.WALKER
    camera_path: CameraPath = CameraPath.FOLLOW
    ground_tilt_deg: float = 0.0
    cloud_points_ground: int = 3000
    cloud_points_walls: int = 1000
    crop_contacts: bool = False
    crop_radius: float = 2.5
    hmr_depth_bias: float = 1.0
    hmr_jitter_sigma_m: float = 0.0
    slam_rotation_noise_rad: float = 0.0
    slam_translation_noise_m: float = 0.0
    fps: float = 30.0
    camera_height: float = 1.6
    camera_distance: float = 3.5
    path_radius: float = 15.0

    def __post_init__(self):
        object.__setattr__(self, "subject", Subject(self.subject))
        object.__setattr__(self, "camera_path", CameraPath(self.camera_path))
        if self.n_frames < 3:
            raise ValueError("n_frames must be at least 3")
        if not self.true_scale > 0:
            raise ValueError("true_scale must be positive")
        if not self.hmr_depth_bias > 0:
            raise ValueError("hmr_depth_bias must be positive")
        for name in ("hmr_jitter_sigma_m", "slam_rotation_noise_rad", "slam_translation_noise_m",
                     "cloud_points_ground", "cloud_points_walls", "crop_radius"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.fps <= 0 or self.camera_height <= 0 or self.camera_distance <= 0:
            raise ValueError("fps, camera_height and camera_distance must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["subject"] = self.subject.value
        d["camera_path"] = self.camera_path.value
        return d


PRESETS = {
    "walker": dict(subject=Subject.WALKER, camera_path=CameraPath.FOLLOW),
    "skater": dict(subject=Subject.SKATER, camera_path=CameraPath.FOLLOW),
    "stationary": dict(subject=Subject.STATIONARY, camera_path=CameraPath.ORBIT),
    "handstand": dict(subject=Subject.HANDSTAND, camera_path=CameraPath.ORBIT),
    "egocentric": dict(subject=Subject.WALKER, camera_path=CameraPath.FOLLOW, crop_contacts=True),
}


def preset_config(name: str, **overrides) -> ScenarioConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ScenarioConfig(**{**PRESETS[name], **overrides})


@dataclass
class Scenario:
    config: ScenarioConfig
    gt_motion: GlobalMotion
    gt_trajectory: Trajectory
    slam_trajectory: Trajectory
    slam_cloud: PointCloud
    hmr_motion: MotionSequence
    true_plane: Plane
    true_scale: float


def _yaw_matrix(yaw):
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _local_to_scene(template):
    # template rows are (right, height, forward); scene axes are (x, y-down, z)
    return np.column_stack([template[:, 0], -template[:, 1], template[:, 2]])


class _Path:
    """Circle of radius ``r`` around the scene origin, by arc length."""

    def __init__(self, radius):
        self.r = radius

    def point(self, s):
        a = s / self.r
        return np.array([self.r * math.sin(a), 0.0, -self.r * math.cos(a)])

    def heading(self, s):
        a = s / self.r
        return np.array([math.cos(a), 0.0, math.sin(a)])


class _Line:
    """Straight path along +z, starting near the back of the room."""

    def __init__(self, start=-16.0):
        self.start = start

    def point(self, s):
        return np.array([0.0, 0.0, self.start + s])

    def heading(self, s):
        return np.array([0.0, 0.0, 1.0])


def _make_path(cfg):
    # the skater glides straight so its world-frame pose never changes
    return _Line() if cfg.subject is Subject.SKATER else _Path(cfg.path_radius)


def _body_frame(path, s):
    h = path.heading(s)
    yaw = math.atan2(h[0], h[2])
    return path.point(s), yaw, _yaw_matrix(yaw)


def _walker_frame(path, t, speed, step_period, standing):
    ground, yaw, R = _body_frame(path, speed * t)
    joints = standing @ R.T + ground
    heading = R[:, 2]
    k = math.floor(t / step_period)
    phase = t / step_period - k

    def footprint(i, side):
        s = speed * i * step_period
        return path.point(s) + side * 0.1 * _yaw_matrix(_body_frame(path, s)[1])[:, 0]

    for foot, ankle, knee, hip, side in _LEGS:
        planted_on_even = side < 0
        if (k % 2 == 0) == planted_on_even:
            toe = footprint(k, side)
        else:
            a, b = footprint(k - 1, side), footprint(k + 1, side)
            toe = a + (b - a) * phase
            toe[1] = -(0.06 + 0.09 * math.sin(math.pi * phase))
        joints[foot] = toe
        joints[ankle] = toe - 0.13 * heading + np.array([0.0, -0.08, 0.0])
        joints[knee] = 0.5 * (joints[hip] + joints[ankle]) + 0.06 * heading
    return joints, yaw


def _subject_motion(cfg: ScenarioConfig, times):
    """Scene-frame joints ``(T, 24, 3)`` and root rotation matrices."""
    path = _make_path(cfg)
    standing = _local_to_scene(_STANDING)
    handstand = _local_to_scene(_HANDSTAND)
    joints = np.empty((len(times), N_JOINTS, 3))
    rots = np.empty((len(times), 3, 3))
    flip = rotvec_to_matrix([0.0, 0.0, math.pi])
    for i, t in enumerate(times):
        if cfg.subject is Subject.WALKER:
            joints[i], yaw = _walker_frame(path, t, 1.2, 0.5, standing)
            rots[i] = _yaw_matrix(yaw)
            continue
        speed = {Subject.STATIONARY: 0.0, Subject.SKATER: 2.0, Subject.HANDSTAND: 0.3}[cfg.subject]
        ground, yaw, R = _body_frame(path, speed * t)
        template = handstand if cfg.subject is Subject.HANDSTAND else standing
        joints[i] = template @ R.T + ground
        rots[i] = R @ flip if cfg.subject is Subject.HANDSTAND else R
    return joints, rots


def _look_rotation(center, target, pitch):
    """World-to-camera rotation for a camera at ``center`` yawed toward
    ``target`` and pitched down by ``pitch`` radians (no roll)."""
    d = target - center
    yaw = math.atan2(d[0], d[2])
    cy, sy, cp, sp = math.cos(yaw), math.sin(yaw), math.cos(pitch), math.sin(pitch)
    z = np.array([sy * cp, sp, cy * cp])
    x = np.array([cy, 0.0, -sy])
    y = np.cross(z, x)
    return np.stack([x, y, z])


def _camera_poses(cfg: ScenarioConfig, times, pelvis):
    pitch = math.radians(cfg.ground_tilt_deg)
    H, D = cfg.camera_height, cfg.camera_distance
    Rs = np.empty((len(times), 3, 3))
    Ts = np.empty((len(times), 3))
    path = _make_path(cfg)
    speed = {Subject.WALKER: 1.2, Subject.STATIONARY: 0.0, Subject.SKATER: 2.0, Subject.HANDSTAND: 0.3}[cfg.subject]
    static_center = np.array([0.0, -H, -(cfg.path_radius + D)])
    for i, t in enumerate(times):
        target = pelvis[i].copy()
        target[1] = -H
        if cfg.camera_path is CameraPath.FOLLOW:
            s = speed * t
            c = path.point(s) - D * path.heading(s) + 0.6 * _yaw_matrix(_body_frame(path, s)[1])[:, 0]
        elif cfg.camera_path is CameraPath.ORBIT:
            a = 0.25 * t
            c = target + D * np.array([math.sin(a), 0.0, -math.cos(a)])
        else:
            c = static_center
            target = np.array([0.0, -H, 0.0])
        c = np.array([c[0], -H, c[2]])
        R = _look_rotation(c, target, pitch)
        Rs[i] = R
        Ts[i] = -R @ c
    return Rs, Ts


def _scene_cloud(cfg: ScenarioConfig, rng, contacts):
    L = _ROOM_HALF
    g = rng.uniform(-L, L, size=(cfg.cloud_points_ground, 2))
    ground = np.column_stack([g[:, 0], np.zeros(len(g)), g[:, 1]])
    n_a = cfg.cloud_points_walls // 2
    n_b = cfg.cloud_points_walls - n_a
    wa = rng.uniform([-L, 0.0], [L, _WALL_HEIGHT], size=(n_a, 2))
    wb = rng.uniform([-L, 0.0], [L, _WALL_HEIGHT], size=(n_b, 2))
    walls = np.concatenate([
        np.column_stack([np.full(n_a, L), -wa[:, 1], wa[:, 0]]),
        np.column_stack([wb[:, 0], -wb[:, 1], np.full(n_b, L)]),
    ])
    if cfg.crop_contacts:
        flat = contacts[:, [0, 2]]
        keep = np.ones(len(ground), dtype=bool)
        for chunk in np.array_split(flat, max(1, len(flat) // 256)):
            d2 = ((ground[:, None, [0, 2]] - chunk[None]) ** 2).sum(axis=2)
            keep &= ~(d2 <= cfg.crop_radius ** 2).any(axis=1)
        return np.concatenate([ground[keep], walls])
    return np.concatenate([ground, walls, contacts])


def _small_rotation(rng, sigma):
    return rotvec_to_matrix(rng.normal(0.0, sigma, size=3)) if sigma > 0 else np.eye(3)


def generate_scenario(cfg: ScenarioConfig) -> Scenario:
    """Build a scenario; identical configs give bit-identical outputs."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_frames
    times = np.arange(n) / cfg.fps
    s = float(cfg.true_scale)

    joints_scene, body_rots = _subject_motion(cfg, times)
    R_sc, T_sc = _camera_poses(cfg, times, joints_scene[:, 0])

    grounded = joints_scene[np.abs(joints_scene[:, :, 1]) == 0.0]
    contacts = np.unique(grounded, axis=0) if len(grounded) else np.zeros((0, 3))
    cloud_scene = _scene_cloud(cfg, rng, contacts)

    # world = first camera frame
    R0, T0 = R_sc[0], T_sc[0]
    to_world = lambda x: x @ R0.T + T0  # noqa: E731
    R_w = np.einsum("nij,kj->nik", R_sc, R0)
    T_w = T_sc - np.einsum("nij,j->ni", R_w, T0)
    R_w[0], T_w[0] = np.eye(3), np.zeros(3)

    joints_w = to_world(joints_scene)
    orient_w = matrix_to_rotvec(R0 @ body_rots).reshape(-1, 3)

    theta_base = rng.normal(0.0, 0.2, size=69)
    beta = [round(float(b), 6) for b in rng.normal(0.0, 1.0, size=10)]
    theta = [[round(float(v), 6) for v in theta_base * math.cos(0.7 * t)] for t in times]
    betas = [list(beta) for _ in range(n)]

    gt_motion = GlobalMotion(times, joints_w, orient_w, joints_w[:, 0].copy(), theta, betas, scale_used=s)
    gt_traj = Trajectory(times, R_w, T_w, ScaleStatus.METRIC)

    # human mesh recovery stream: camera-space joints, biased depth, jitter
    joints_cam = np.einsum("nij,nkj->nki", R_w, joints_w) + T_w[:, None, :]
    joints_cam = joints_cam * cfg.hmr_depth_bias
    if cfg.hmr_jitter_sigma_m > 0:
        joints_cam = joints_cam + rng.normal(0.0, cfg.hmr_jitter_sigma_m, size=joints_cam.shape)
    psi = matrix_to_rotvec(R_w @ rotvec_to_matrix(orient_w)).reshape(-1, 3)
    hmr = MotionSequence(times, joints_cam, psi, joints_cam[:, 0].copy(), theta, betas)

    # SLAM stream: same world, translations and map divided by the scale
    R_slam = R_w.copy()
    T_slam = T_w.copy()
    for i in range(1, n):
        if cfg.slam_rotation_noise_rad > 0:
            R_slam[i] = _small_rotation(rng, cfg.slam_rotation_noise_rad) @ R_slam[i]
        if cfg.slam_translation_noise_m > 0:
            T_slam[i] = T_slam[i] + rng.normal(0.0, cfg.slam_translation_noise_m, size=3)
    slam_traj = Trajectory(times, R_slam, T_slam / s, ScaleStatus.UNKNOWN)
    slam_cloud = PointCloud(to_world(cloud_scene) / s)

    down_w = R0 @ np.array([0.0, 1.0, 0.0])
    plane = Plane.from_point_normal(to_world(np.zeros(3)) / s, down_w)
    return Scenario(cfg, gt_motion, gt_traj, slam_traj, slam_cloud, hmr, plane, s)


def oracle_per_frame_scale(scenario: Scenario, frame: int) -> float:
    """Brute-force per-frame scale: lowest joint, ray from the SLAM camera,
    exhaustive nearest-point scan, depth ratio.  Plain Python on purpose."""
    joints = [list(map(float, j)) for j in scenario.hmr_motion.joints[frame]]
    best = 0
    for i, j in enumerate(joints):
        if j[1] > joints[best][1]:
            best = i
    J = joints[best]
    R = [list(map(float, r)) for r in scenario.slam_trajectory.rotations[frame]]
    T = list(map(float, scenario.slam_trajectory.translations[frame]))
    # o = R^T (-T), Jw = R^T (J - T)
    o = [-sum(R[r][c] * T[r] for r in range(3)) for c in range(3)]
    Jw = [sum(R[r][c] * (J[r] - T[r]) for r in range(3)) for c in range(3)]
    v = [Jw[c] - o[c] for c in range(3)]
    vn = math.sqrt(sum(x * x for x in v))
    d = [x / vn for x in v]
    best_p, best_perp = None, math.inf
    for p in scenario.slam_cloud.points:
        w = [float(p[c]) - o[c] for c in range(3)]
        along = sum(w[c] * d[c] for c in range(3))
        if along <= 0:
            continue
        perp = math.sqrt(sum((w[c] - along * d[c]) ** 2 for c in range(3)))
        if perp < best_perp:
            best_p, best_perp = p, perp
    if best_p is None:
        return math.nan
    d_rel = math.sqrt(sum((float(best_p[c]) - o[c]) ** 2 for c in range(3)))
    d_abs = math.sqrt(sum(x * x for x in J))
    return d_abs / d_rel


def export_scenario(scenario: Scenario, directory):
    """Write a scenario as an on-disk bundle (see docs/formats.md)."""
    from pathlib import Path

    from scalecal import formats

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_tum_trajectory(scenario.slam_trajectory, out / "slam_traj.tum")
    formats.write_ply_cloud(scenario.slam_cloud, out / "cloud.ply")
    formats.write_joints_jsonl(scenario.hmr_motion, out / "hmr_joints.jsonl")
    formats.write_tum_trajectory(scenario.gt_trajectory, out / "gt_traj.tum")
    formats.write_joints_jsonl(scenario.gt_motion, out / "gt_motion.jsonl")
    meta = {
        "config": scenario.config.to_dict(),
        "true_scale": scenario.true_scale,
        "true_plane": {"normal": [float(v) for v in scenario.true_plane.normal],
                       "offset": float(scenario.true_plane.offset)},
    }
    manifest = formats.Manifest("slam_traj.tum", "cloud.ply", "hmr_joints.jsonl",
                                "gt_traj.tum", "gt_motion.jsonl", meta=meta)
    formats.write_manifest(manifest, out)
    return manifest
