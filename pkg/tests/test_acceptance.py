"""Acceptance criteria, one test per criterion at the stated tolerances.

Each check is recorded in ``RESULTS``; the terminal summary prints one
PASS/FAIL line per criterion.
"""
import math
import time
from collections import defaultdict

import numpy as np
import pytest

from oracles import nearest_to_ray_exhaustive, procrustes_error_bruteforce, random_rotation
from scalecal import formats
from scalecal.ablation import ablation_variants, run_ablation, run_pipeline
from scalecal.calibration import CalibrationConfig, CalibrationFailed, ReferenceKind, calibrate_sequence
from scalecal.calibration import select_contact_joint
from scalecal.geometry import (
    CameraPose,
    PointCloud,
    Ray,
    ScaleStatus,
    Trajectory,
    camera_to_world_root,
    nearest_point_to_ray,
    rotvec_to_matrix,
    umeyama_align,
    world_to_camera_root,
)
from scalecal.metrics import AlignMode, root_errors, mpjpe_pa, mpjpe_w, mpjpe_wa, rte, segments, trajectory_ate
from scalecal.motion import HANDS, GlobalMotion, MotionSequence
from scalecal.synth import _STANDING, generate_scenario, preset_config

RESULTS = defaultdict(list)


def check(n, name, ok, detail=""):
    ok = bool(ok)
    RESULTS[n].append((name, ok, detail))
    print(f"criterion {n} [{name}]: {'pass' if ok else 'FAIL'} {detail}")
    return ok


def noisy(seed, scale, **kw):
    base = dict(hmr_jitter_sigma_m=0.05, slam_rotation_noise_rad=0.002, slam_translation_noise_m=0.01)
    base.update(kw)
    return preset_config("walker", seed=seed, true_scale=scale, **base)


def test_criterion_1_exact_recovery():
    worst_ratio = worst_ate = worst_time = 0.0
    for preset in ("walker", "skater", "stationary", "handstand"):
        for s in (0.1, 1.0, 3.0, 17.0):
            t0 = time.perf_counter()
            sc = generate_scenario(preset_config(preset, n_frames=500, true_scale=s))
            out = run_pipeline(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud, CalibrationConfig())
            ate_s = trajectory_ate(out.metric_trajectory, sc.gt_trajectory, AlignMode.SE3)
            worst_time = max(worst_time, time.perf_counter() - t0)
            worst_ratio = max(worst_ratio, abs(out.scale / s - 1))
            worst_ate = max(worst_ate, ate_s)
    ok = check(1, "scale", worst_ratio < 1e-6, f"max |s/s_true-1| = {worst_ratio:.2e}")
    ok &= check(1, "ATE-S", worst_ate < 1e-6, f"max ATE-S = {worst_ate:.2e} m")
    ok &= check(1, "runtime", worst_time < 2.0, f"max {worst_time:.2f} s per scenario")
    assert ok


def test_criterion_2_fallback_recovery():
    s = 5.0
    sc = generate_scenario(preset_config("egocentric", n_frames=500, true_scale=s))
    res = calibrate_sequence(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud, CalibrationConfig())
    err = abs(res.sequence_scale / s - 1)
    ok = check(2, "plane path", err < 1e-4 and res.count(ReferenceKind.PLANE) == 500,
               f"|s/s_true-1| = {err:.2e}, {res.count(ReferenceKind.PLANE)} plane frames")
    try:
        calibrate_sequence(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud, CalibrationConfig(normal_mode=None))
        without = False
    except CalibrationFailed as exc:
        without = len(exc.result.rejected_frames) == 500
    ok &= check(2, "w/o fitting fails", without, "all 500 frames rejected without a plane")
    assert ok


def test_criterion_3_bias_propagation():
    s = 3.0
    sc = generate_scenario(preset_config("walker", n_frames=500, true_scale=s, hmr_depth_bias=1.05))
    on = run_pipeline(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud, CalibrationConfig())
    off = run_pipeline(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud, None)
    ok = check(3, "scale", abs(on.scale - 1.05 * s) < 1e-6, f"s = {on.scale!r}, expected {1.05 * s!r}")
    r_on, r_off = rte(on.global_motion, sc.gt_motion), rte(off.global_motion, sc.gt_motion)
    ok &= check(3, "root error", r_on < r_off, f"RTE {r_on:.3f}% calibrated vs {r_off:.3f}% uncalibrated")
    assert ok


def test_criterion_4_calibration_on_vs_off():
    ate_wins = rte_wins = med_wins = 0
    for seed in range(100):
        s = float(np.exp(np.random.default_rng(1000 + seed).uniform(math.log(0.1), math.log(20))))
        sc = generate_scenario(noisy(seed, s, n_frames=300))
        on = run_pipeline(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud, CalibrationConfig())
        off = run_pipeline(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud, None)
        ate_wins += (trajectory_ate(on.metric_trajectory, sc.gt_trajectory, AlignMode.SE3)
                     < trajectory_ate(off.metric_trajectory, sc.gt_trajectory, AlignMode.SE3))
        rte_wins += rte(on.global_motion, sc.gt_motion) < rte(off.global_motion, sc.gt_motion)
        med_wins += (np.median(root_errors(on.global_motion, sc.gt_motion))
                     < np.median(root_errors(off.global_motion, sc.gt_motion)))
    ok = check(4, "ATE-S", ate_wins >= 95, f"{ate_wins}/100 improved")
    ok &= check(4, "RTE", rte_wins >= 95, f"{rte_wins}/100 improved")
    ok &= check(4, "median root error", med_wins >= 95, f"{med_wins}/100 improved")
    assert ok


def test_criterion_5_reference_joint_trend():
    names = ("contact", "feet-fixed", "pelvis-fixed", "head-fixed")
    variants = [v for v in ablation_variants() if v.name in names]
    scores = defaultdict(list)
    for seed in range(20):
        sc = generate_scenario(noisy(seed, 3.0, n_frames=300, hmr_jitter_sigma_m=0.01,
                                     slam_rotation_noise_rad=0.001, slam_translation_noise_m=0.005))
        for row in run_ablation(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud, sc.gt_motion,
                                sc.gt_trajectory, variants, threads=1):
            scores[row.variant].append(row.metrics.w_mpjpe_mm)
    m = {k: float(np.mean(v)) for k, v in scores.items()}
    ordered = m["contact"] <= m["feet-fixed"] < m["pelvis-fixed"] < m["head-fixed"]
    detail = ", ".join(f"{k} {m[k]:.1f}" for k in names) + " mm"
    assert check(5, "W-MPJPE order", ordered, detail)


def test_criterion_6_outlier_robustness():
    worst = 0.0
    for seed in range(5):
        sc = generate_scenario(preset_config("walker", seed=seed, n_frames=500, true_scale=3.0,
                                             hmr_jitter_sigma_m=0.02))
        base = calibrate_sequence(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud).sequence_scale
        m = sc.hmr_motion
        joints = m.joints.copy()
        bad = np.random.default_rng(seed).choice(500, 100, replace=False)
        joints[bad] *= 10.0  # metric depth, hence the frame scale, 10x too large
        corrupted = MotionSequence(m.timestamps, joints, m.root_orient, m.root_trans, m.theta, m.beta)
        s = calibrate_sequence(corrupted, sc.slam_trajectory, sc.slam_cloud).sequence_scale
        worst = max(worst, abs(s / base - 1))
    assert check(6, "median", worst < 0.01, f"max relative change {worst:.2e}")


def _gm(joints, roots):
    return GlobalMotion(np.arange(len(joints), dtype=float), joints, np.zeros((len(joints), 3)), roots)


def _traj(centers):
    return Trajectory(np.arange(len(centers), dtype=float), [np.eye(3)] * len(centers), -np.asarray(centers),
                      ScaleStatus.METRIC)


def test_criterion_7_metric_suite():
    rng = np.random.default_rng(7)
    ok = True
    # ATE examples
    c = rng.normal(size=(30, 3))
    ate_ok = (trajectory_ate(_traj(c), _traj(c), "sim3") < 1e-12 and trajectory_ate(_traj(c), _traj(c), "se3") < 1e-12
              and trajectory_ate(_traj(2 * c), _traj(c), "sim3") < 1e-9
              and trajectory_ate(_traj(2 * c), _traj(c), "se3") > 0)
    line = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])
    ate_ok &= abs(trajectory_ate(_traj(2 * line), _traj(line), "se3") - math.sqrt(2 / 3)) < 1e-12
    ok &= check(7, "ATE examples", ate_ok)

    # PA examples
    g = rng.normal(size=(4, 24, 3))
    p = np.stack([1.3 * f @ random_rotation(rng).T + rng.normal(size=3) for f in g])
    skel = _STANDING.copy()
    moved = skel.copy()
    moved[4, 0] += 0.024
    best = procrustes_error_bruteforce(moved, skel) * 1000
    pa = mpjpe_pa(moved[None], skel[None])
    ok &= check(7, "PA examples", mpjpe_pa(g, g) < 1e-9 and mpjpe_pa(p, g) < 1e-6 and best <= 1.0 + 1e-6 <= pa + 1e-6,
                f"24 mm joint: optimum {best:.3f} mm, Procrustes {pa:.3f} mm")

    # W / WA / RTE examples
    steps = rng.normal(size=(250, 3)) * 0.05 + [0.04, 0, 0.01]
    steps[:, 1] = 0
    roots = np.cumsum(steps, axis=0)
    joints = rng.normal(size=(1, 24, 3)) * 0.3 + roots[:, None]
    gt = _gm(joints, roots)
    c2, s2 = math.cos(1.3), math.sin(1.3)
    yaw = np.array([[c2, 0, s2], [0, 1, 0], [-s2, 0, c2]])
    R = random_rotation(rng)
    t = rng.normal(size=3)
    w_ok = mpjpe_w(gt, gt) < 1e-9 and mpjpe_w(_gm(joints @ yaw.T + t, roots @ yaw.T + t), gt) < 1e-6
    wa_ok = mpjpe_wa(gt, gt) < 1e-9 and mpjpe_wa(_gm(joints @ R.T + t, roots @ R.T + t), gt) < 1e-6
    rte_ok = rte(gt, gt) < 1e-9 and rte(_gm(joints @ R.T + t, roots @ R.T + t), gt) < 1e-6
    seg_ok = [(s.start, s.stop) for s in segments(250)] == [(0, 100), (100, 200), (200, 250)]
    ok &= check(7, "W/WA/RTE/segment examples", w_ok and wa_ok and rte_ok and seg_ok)

    # Sim3 vs Se3 separation on a scaled synthetic trajectory
    sc = generate_scenario(preset_config("walker", n_frames=200, true_scale=3.0))
    a = trajectory_ate(sc.slam_trajectory, sc.gt_trajectory, AlignMode.SIM3)
    b = trajectory_ate(sc.slam_trajectory, sc.gt_trajectory, AlignMode.SE3)
    ok &= check(7, "Sim3 vs Se3", a < 1e-9 and b > 0.1, f"ATE {a:.1e} m, ATE-S {b:.2f} m")

    # WA <= W over 100 random scenarios
    viol = 0
    for seed in range(100):
        sc = generate_scenario(noisy(seed, float(np.random.default_rng(seed).uniform(0.5, 10)), n_frames=150))
        out = run_pipeline(sc.hmr_motion, sc.slam_trajectory, sc.slam_cloud, CalibrationConfig())
        viol += mpjpe_wa(out.global_motion, sc.gt_motion) > mpjpe_w(out.global_motion, sc.gt_motion)
    ok &= check(7, "WA <= W", viol == 0, f"{100 - viol}/100 scenarios")
    assert ok


@pytest.mark.xfail(strict=True, reason="two literal examples contradict the mandated alignment rules; see ledger")
def test_criterion_7_literal_examples():
    skel = _STANDING.copy()
    moved = skel.copy()
    moved[4, 0] += 0.024
    pa = mpjpe_pa(moved[None], skel[None])
    ok = check(7, "PA 24 mm example <= 1 mm", pa <= 1.0, f"Procrustes gives {pa:.3f} mm")
    rng = np.random.default_rng(3)
    roots = np.cumsum(rng.normal(size=(200, 3)) * 0.05 + [0.04, 0, 0.01], axis=0)
    joints = rng.normal(size=(1, 24, 3)) * 0.3 + roots[:, None]
    R = random_rotation(rng)
    w = mpjpe_w(_gm(joints @ R.T, roots @ R.T), _gm(joints, roots))
    ok &= check(7, "W = 0 under an arbitrary rotation", w < 1e-6, f"two-root fit leaves {w:.1f} mm")
    assert ok


def test_criterion_8_geometry_oracles():
    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(1000):
        pts = rng.normal(size=(int(rng.integers(1, 201)), 3)) * 3
        d = rng.normal(size=3)
        ray = Ray(rng.normal(size=3), d / np.linalg.norm(d))
        got = nearest_point_to_ray(PointCloud(pts), ray)
        want = nearest_to_ray_exhaustive(pts, ray.origin, ray.direction)
        if (got is None) != (want is None) or (got is not None and (got[0] != want[0] or abs(got[1] - want[1]) > 1e-12)):
            mismatches += 1
    ok = check(8, "nearest point", mismatches == 0, f"{1000 - mismatches}/1000 agree with exhaustive scan")

    worst = 0.0
    for _ in range(1000):
        x = rng.normal(size=(int(rng.integers(3, 50)), 3))
        R = random_rotation(rng)
        s = float(np.exp(rng.uniform(-2, 2)))
        t = rng.normal(size=3) * 10
        tf = umeyama_align(x, s * x @ R.T + t)
        worst = max(worst, abs(tf.scale - s), np.abs(tf.rotation - R).max(), np.abs(tf.translation - t).max())
    ok &= check(8, "Umeyama", worst < 1e-7, f"max error {worst:.1e}")

    worst = 0.0
    for _ in range(1000):
        pose = CameraPose(random_rotation(rng), rng.normal(size=3) * 5)
        phi = rng.normal(size=3)
        phi *= rng.uniform(0, 3.0) / np.linalg.norm(phi)
        gamma = rng.normal(size=3) * 5
        psi, tau = world_to_camera_root(phi, gamma, pose)
        phi2, gamma2 = camera_to_world_root(psi, tau, pose)
        worst = max(worst, np.abs(rotvec_to_matrix(phi2) - rotvec_to_matrix(phi)).max(), np.abs(gamma2 - gamma).max())
    ok &= check(8, "root roundtrip", worst < 1e-9, f"max error {worst:.1e}")
    assert ok


def test_criterion_9_handstand_contact():
    bad = total = 0
    for seed, s in ((0, 1.0), (1, 3.0), (2, 17.0)):
        sc = generate_scenario(preset_config("handstand", seed=seed, n_frames=500, true_scale=s))
        for t in range(len(sc.hmr_motion)):
            total += 1
            bad += select_contact_joint(sc.hmr_motion[t], sc.slam_trajectory[t]).joint_index not in HANDS
    assert check(9, "hands selected", bad == 0, f"{total - bad}/{total} frames pick a hand")


def test_criterion_10_format_fidelity(tmp_path):
    rng = np.random.default_rng(10)
    n = 1000
    tr = Trajectory(np.cumsum(rng.uniform(0.01, 1, n)), [random_rotation(rng) for _ in range(n)],
                    rng.normal(size=(n, 3)) * 20, ScaleStatus.METRIC)
    formats.write_tum_trajectory(tr, tmp_path / "t.tum")
    back = formats.read_tum_trajectory(tmp_path / "t.tum")
    drift = max(np.abs(back.rotations - tr.rotations).max(), np.abs(back.translations - tr.translations).max())
    ok = check(10, "TUM roundtrip", drift < 1e-9, f"max drift {drift:.1e}")

    pts = rng.normal(size=(10000, 3)) * 30
    formats.write_ply_cloud(PointCloud(pts), tmp_path / "c.ply")
    d = np.abs(formats.read_ply_cloud(tmp_path / "c.ply").points - pts).max()
    ok &= check(10, "PLY roundtrip", d < 1e-6, f"max drift {d:.1e}")

    sc = generate_scenario(preset_config("walker", n_frames=50))
    formats.write_joints_jsonl(sc.hmr_motion, tmp_path / "j.jsonl")
    jb = formats.read_joints_jsonl(tmp_path / "j.jsonl")
    ok &= check(10, "JSONL roundtrip", np.array_equal(jb.joints, sc.hmr_motion.joints)
                and jb.theta == sc.hmr_motion.theta and jb.beta == sc.hmr_motion.beta)

    cases = [
        ("t.tum", "0 0 0 0 0 0 0 1\n1 0 0 0 0 0 1\n", formats.read_tum_trajectory, 2),
        ("q.tum", "0 0 0 0 0 0 0 2\n", formats.read_tum_trajectory, 1),
        ("c.ply", "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                  "property float z\nend_header\n1 2\n", formats.read_ply_cloud, 8),
        ("j.jsonl", '{"t": 0, "joints": [[0, 0, 1]], "root_orient": [0, 0, 0], "root_trans": [0, 0, 1]}\n',
         formats.read_joints_jsonl, 1),
    ]
    located = 0
    for name, text, reader, line in cases:
        path = tmp_path / ("bad_" + name)
        path.write_text(text)
        try:
            reader(path)
        except formats.ParseError as exc:
            located += exc.line == line and str(path) in str(exc)
    ok &= check(10, "malformed rejection", located == len(cases), f"{located}/{len(cases)} with file and line")
    assert ok
