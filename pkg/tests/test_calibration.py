import numpy as np
import pytest

from scalecal.calibration import (
    CalibrationConfig,
    CalibrationFailed,
    FrameScale,
    ReferenceKind,
    RejectReason,
    Rejection,
    build_reference_ray,
    calibrate_sequence,
    contact_from_joint,
    frame_scale_from_cloud,
    frame_scale_from_plane,
    select_contact_joint,
)
from scalecal.geometry import CameraPose, Plane, PointCloud, ScaleStatus, Trajectory
from scalecal.motion import HANDS, HumanFrame, MotionSequence
from scalecal.synth import generate_scenario, oracle_per_frame_scale, preset_config

IDENT = CameraPose(np.eye(3), np.zeros(3))


def frame_with(joint_index, position, others_y=-1.0):
    J = np.zeros((24, 3))
    J[:, 1] = others_y
    J[:, 2] = 3.0
    J[joint_index] = position
    return HumanFrame(J, np.zeros(3), J[0].copy(), 0.0)


def test_select_lowest_joint():
    J = np.zeros((24, 3))
    J[:4, 1] = [0.3, 0.9, -0.5, 0.1]
    J[4:, 1] = -1
    f = HumanFrame(J, np.zeros(3), np.zeros(3), 0.0)
    assert select_contact_joint(f, IDENT).joint_index == 1
    J[7, 1] = 0.9
    assert select_contact_joint(f, IDENT).joint_index == 1


def test_contact_depth_and_world_position():
    pose = CameraPose(np.eye(3), [0, 0, -2.0])
    c = contact_from_joint(frame_with(3, [0, 0, 4.0]), pose, 3)
    assert c.absolute_depth == 4.0
    assert np.allclose(c.world_position, [0, 0, 6.0])


def test_reference_ray_examples():
    c = contact_from_joint(frame_with(0, [0, 0, 4.0]), IDENT, 0)
    assert np.allclose(build_reference_ray(c, IDENT).direction, [0, 0, 1])
    pose = CameraPose(np.eye(3), [-1.0, -1.0, -1.0])  # center (1, 1, 1)
    c = contact_from_joint(frame_with(0, [0, 0, 4.0]), pose, 0)
    assert np.allclose(c.world_position, [1, 1, 5])
    ray = build_reference_ray(c, pose)
    assert np.allclose(ray.origin, [1, 1, 1]) and np.allclose(ray.direction, [0, 0, 1])
    c = contact_from_joint(frame_with(0, [0, 0, 0.0]), IDENT, 0)
    with pytest.raises(ValueError):
        build_reference_ray(c, IDENT)


def test_cloud_scale_ratio():
    # joint 5 at (0, 0, 4) is the lowest (y = 0 > -1)
    f = frame_with(5, [0, 0, 4.0], others_y=-1.0)
    out = frame_scale_from_cloud(f, IDENT, PointCloud([[0, 0, 2.0], [3, -2, 9]]))
    assert isinstance(out, FrameScale)
    assert out.scale == pytest.approx(2.0) and out.reference_kind is ReferenceKind.CLOUD
    assert out.relative_depth == pytest.approx(2.0) and out.absolute_depth == pytest.approx(4.0)


def test_cloud_rejects_far_points():
    f = frame_with(5, [0, 0, 4.0])
    out = frame_scale_from_cloud(f, IDENT, PointCloud([[0.5, 0, 4.0]]), CalibrationConfig(max_perp_distance=0.25))
    assert isinstance(out, Rejection) and out.reason is RejectReason.NO_INTERSECTION
    out = frame_scale_from_cloud(f, IDENT, PointCloud([[0, 0, -4.0]]))
    assert isinstance(out, Rejection) and out.reason is RejectReason.NO_INTERSECTION


def test_plane_scale_examples():
    f = frame_with(5, [0, 1.0, 0.0], others_y=-1.0)
    out = frame_scale_from_plane(f, IDENT, Plane([0, 1, 0], -2.0))
    assert isinstance(out, FrameScale)
    assert out.relative_depth == pytest.approx(2.0) and out.scale == pytest.approx(0.5)
    assert out.reference_kind is ReferenceKind.PLANE
    f = frame_with(5, [1.0, 0.0, 0.0], others_y=-1.0)
    assert frame_scale_from_plane(f, IDENT, Plane([0, 1, 0], -2.0)).reason is RejectReason.PARALLEL_RAY
    f = frame_with(5, [0, 1.0, 0.0], others_y=-1.0)
    assert frame_scale_from_plane(f, IDENT, Plane([0, 1, 0], 2.0)).reason is RejectReason.BEHIND_CAMERA


def _static_sequence(joint_depths_and_points):
    """One frame per (contact joint position, cloud point) with identity poses."""
    n = len(joint_depths_and_points)
    J = np.zeros((n, 24, 3))
    J[:, :, 1] = -1
    J[:, :, 2] = 3
    pts = []
    for i, (j, p) in enumerate(joint_depths_and_points):
        J[i, 10] = j
        pts.append(p)
    motion = MotionSequence(np.arange(n, dtype=float), J, np.zeros((n, 3)), J[:, 0])
    traj = Trajectory(np.arange(n, dtype=float), [np.eye(3)] * n, np.zeros((n, 3)))
    return motion, traj, PointCloud(pts)


def test_median_rule():
    # scales 1.8, 2.0, 2.2, 9.0 from depth ratios along distinct rays
    specs = []
    for k, s in enumerate([1.8, 2.0, 2.2, 9.0]):
        d = np.array([k * 0.5, 0.1, 1.0])
        d /= np.linalg.norm(d)
        specs.append((d * 4.0, d * 4.0 / s))
    motion, traj, cloud = _static_sequence(specs)
    res = calibrate_sequence(motion, traj, cloud, CalibrationConfig(normal_mode=None))
    assert res.sequence_scale == pytest.approx(2.1)
    assert len(res.per_frame) == 4


def test_failure_when_too_few_frames():
    motion, traj, cloud = _static_sequence([([0, 0.1, 4.0], [0, 0.05, 2.0])])
    with pytest.raises(CalibrationFailed) as exc:
        calibrate_sequence(motion, traj, cloud, CalibrationConfig(min_valid_frames=2))
    assert exc.value.result is not None and len(exc.value.result.per_frame) == 1


def test_requires_unknown_scale():
    motion, traj, cloud = _static_sequence([([0, 0.1, 4.0], [0, 0.05, 2.0])])
    traj.scale_status = ScaleStatus.METRIC
    with pytest.raises(ValueError):
        calibrate_sequence(motion, traj, cloud)


@pytest.mark.parametrize("preset", ["walker", "skater", "stationary", "handstand"])
def test_matches_oracle_per_frame(preset):
    sc = generate_scenario(preset_config(preset, n_frames=40, true_scale=2.5, seed=4))
    res = calibrate_sequence(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud)
    assert len(res.per_frame) == 40 and not res.rejected_frames
    for f in res.per_frame:
        assert abs(f.scale - oracle_per_frame_scale(sc, f.frame_index)) < 1e-9
        assert abs(f.scale - sc.true_scale) < 1e-9
    assert abs(res.sequence_scale - 2.5) < 1e-9


def test_egocentric_goes_through_plane():
    sc = generate_scenario(preset_config("egocentric", n_frames=60, true_scale=7.0))
    res = calibrate_sequence(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud)
    assert res.count(ReferenceKind.PLANE) == 60 and res.count(ReferenceKind.CLOUD) == 0
    assert abs(res.sequence_scale / 7.0 - 1) < 1e-6
    with pytest.raises(CalibrationFailed):
        calibrate_sequence(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud, CalibrationConfig(normal_mode=None))


def test_given_plane_is_used():
    sc = generate_scenario(preset_config("egocentric", n_frames=30, true_scale=2.0))
    res = calibrate_sequence(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud, plane=sc.true_plane)
    assert res.ground_fit is None and abs(res.sequence_scale - 2.0) < 1e-9


def test_fixed_reference_joints():
    sc = generate_scenario(preset_config("walker", n_frames=30, true_scale=2.0))
    res = calibrate_sequence(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud,
                             CalibrationConfig(reference_joints=(10, 11)))
    assert {f.contact.joint_index for f in res.per_frame} <= {10, 11}
    assert len(res.per_frame) + len(res.rejected_frames) == 60


def test_handstand_selects_hands():
    sc = generate_scenario(preset_config("handstand", n_frames=50))
    for t in range(50):
        c = select_contact_joint(sc.hmr_motion[t], sc.slam_trajectory[t])
        assert c.joint_index in HANDS


def test_config_validation():
    with pytest.raises(ValueError):
        CalibrationConfig(max_perp_distance=0)
    with pytest.raises(ValueError):
        CalibrationConfig(reference_joints=(24,))
    with pytest.raises(ValueError):
        CalibrationConfig(normal_mode="sideways")
