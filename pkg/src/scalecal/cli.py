"""Command-line entry point: ``scalecal {calibrate,synth,eval,ablate}``.

Exit codes: 0 success, 1 bad input (missing file, parse or validation
error), 2 method failure (calibration failed, sequence length mismatch).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from scalecal import formats
from scalecal.ablation import ABLATION_COLUMNS, ablation_variants, run_ablation, run_pipeline, sweep_variants
from scalecal.calibration import CalibrationConfig, CalibrationFailed
from scalecal.geometry import LengthMismatch, ScaleStatus
from scalecal.metrics import evaluate, root_errors
from scalecal.synth import PRESETS, CameraPath, export_scenario, generate_scenario, preset_config

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_METHOD = 2


def _err(msg: str) -> None:
    print(f"scalecal: {msg}", file=sys.stderr)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def _out_path(raw) -> Path:
    out = Path(raw)
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def cmd_calibrate(args) -> int:
    cfg = CalibrationConfig(
        max_perp_distance=args.max_perp,
        plane_bin_height=args.bin_height,
        plane_min_bin_fraction=args.min_bin_fraction,
        ransac_iters=args.ransac_iters,
        ransac_tol=args.ransac_tol,
        normal_mode=None if args.normal_mode == "none" else args.normal_mode,
        min_valid_frames=args.min_valid_frames,
        seed=args.seed,
    )
    traj = formats.read_tum_trajectory(args.traj, ScaleStatus.UNKNOWN)
    cloud = formats.read_ply_cloud(args.cloud)
    motion = formats.read_joints_jsonl(args.joints)
    gt_motion = formats.read_global_motion_jsonl(args.gt_motion) if args.gt_motion else None
    gt_traj = formats.read_tum_trajectory(args.gt_traj, ScaleStatus.METRIC) if args.gt_traj else None

    out = _out_path(args.out)
    try:
        result = run_pipeline(motion, traj, cloud, cfg)
    except CalibrationFailed as exc:
        if exc.result is not None:
            formats.write_report_json(out, exc.result, extra={"status": "failed", "error": str(exc)})
        raise
    formats.write_tum_trajectory(result.metric_trajectory, _sibling(out, "_traj.tum"))
    formats.write_joints_jsonl(result.global_motion, _sibling(out, "_motion.jsonl"))
    _write_csv(_sibling(out, "_scales.csv"), ["frame", "value"],
               [(f.frame_index, f.scale) for f in result.calibration.per_frame])
    metrics = None
    if gt_motion is not None or gt_traj is not None:
        metrics = evaluate(result.global_motion if gt_motion else None, gt_motion,
                           result.metric_trajectory if gt_traj else None, gt_traj)
    formats.write_report_json(out, result.calibration, metrics, extra={"status": "ok"})
    print(f"scale {result.scale!r} from {len(result.calibration.per_frame)} frames "
          f"({len(result.calibration.rejected_frames)} rejected)")
    return EXIT_OK


def cmd_synth(args) -> int:
    overrides = dict(
        seed=args.seed, n_frames=args.frames, true_scale=args.scale,
        hmr_jitter_sigma_m=args.jitter, hmr_depth_bias=args.depth_bias,
        slam_rotation_noise_rad=args.slam_rot_noise, slam_translation_noise_m=args.slam_trans_noise,
        ground_tilt_deg=args.tilt,
    )
    if args.camera_path:
        overrides["camera_path"] = CameraPath(args.camera_path)
    if args.ground_points is not None:
        overrides["cloud_points_ground"] = args.ground_points
    if args.wall_points is not None:
        overrides["cloud_points_walls"] = args.wall_points
    if args.crop_contacts:
        overrides["crop_contacts"] = True
    cfg = preset_config(args.preset, **overrides)
    export_scenario(generate_scenario(cfg), args.out)
    print(f"wrote {args.preset} scenario ({cfg.n_frames} frames, scale {cfg.true_scale!r}) to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if not ((args.pred_motion and args.gt_motion) or (args.pred_traj and args.gt_traj)):
        raise ValueError("give --pred-motion with --gt-motion and/or --pred-traj with --gt-traj")
    pm = formats.read_global_motion_jsonl(args.pred_motion) if args.pred_motion else None
    gm = formats.read_global_motion_jsonl(args.gt_motion) if args.gt_motion else None
    pt = formats.read_tum_trajectory(args.pred_traj) if args.pred_traj else None
    gt = formats.read_tum_trajectory(args.gt_traj, ScaleStatus.METRIC) if args.gt_traj else None
    if (pm is None) != (gm is None) or (pt is None) != (gt is None):
        raise ValueError("predicted and ground-truth inputs must be given in pairs")
    report = evaluate(pm, gm, pt, gt, rte_denominator=args.rte_denominator)
    out = _out_path(args.out)
    formats.write_report_json(out, None, report)
    if pm is not None and len(gm) >= 3:
        err = root_errors(pm, gm)
        _write_csv(_sibling(out, "_root_errors.csv"), ["frame", "value"], list(enumerate(err.tolist())))
    print(json.dumps({k: v for k, v in report.to_dict().items() if k != "per_segment"}))
    return EXIT_OK


def cmd_ablate(args) -> int:
    root = Path(args.scenario)
    m = formats.read_manifest(root)
    if m.gt_motion is None or m.gt_trajectory is None:
        raise ValueError(f"{root} has no ground truth; ablation needs gt_motion and gt_trajectory")
    motion = formats.read_joints_jsonl(m.resolve(root, "joints"))
    traj = formats.read_tum_trajectory(m.resolve(root, "trajectory"), ScaleStatus.UNKNOWN)
    cloud = formats.read_ply_cloud(m.resolve(root, "cloud"))
    gt_motion = formats.read_global_motion_jsonl(m.resolve(root, "gt_motion"))
    gt_traj = formats.read_tum_trajectory(m.resolve(root, "gt_trajectory"), ScaleStatus.METRIC)
    base = CalibrationConfig(seed=args.seed)
    variants = ablation_variants(base) + sweep_variants(base, args.sweep_max_perp, args.sweep_bin_height)
    rows = run_ablation(motion, traj, cloud, gt_motion, gt_traj, variants)
    records = [r.as_record() for r in rows]
    _write_csv(_out_path(args.out), ABLATION_COLUMNS, [[rec[c] for c in ABLATION_COLUMNS] for rec in records])
    for rec in records:
        w = rec["w_mpjpe_mm"]
        print(f"{rec['variant']:<16} {rec['status']:<7} W-MPJPE {'-' if w is None else f'{w:.1f}'}")
    return EXIT_OK


def _float_list(text: str):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scalecal", description="Metric scale calibration of monocular SLAM from human joints.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="calibrate a SLAM trajectory and compose world-frame motion")
    p.add_argument("--traj", required=True, help="up-to-scale SLAM trajectory (TUM)")
    p.add_argument("--cloud", required=True, help="SLAM point cloud (ASCII PLY)")
    p.add_argument("--joints", required=True, help="camera-space human motion (JSONL)")
    p.add_argument("--out", required=True, help="report path (JSON); outputs are written beside it")
    p.add_argument("--normal-mode", choices=["contacts", "y-axis", "ransac", "none"], default="contacts")
    p.add_argument("--max-perp", type=float, default=0.25, help="max ray-to-point distance, meters")
    p.add_argument("--bin-height", type=float, default=0.10, help="ground histogram bin height (SLAM units)")
    p.add_argument("--min-bin-fraction", type=float, default=0.05)
    p.add_argument("--ransac-iters", type=int, default=1000)
    p.add_argument("--ransac-tol", type=float, default=0.05)
    p.add_argument("--min-valid-frames", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gt-motion", help="optional ground-truth world motion (JSONL) for metrics")
    p.add_argument("--gt-traj", help="optional ground-truth metric trajectory (TUM) for metrics")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("synth", help="write a synthetic scenario bundle")
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--scale", type=float, default=3.0, help="true scale (SLAM units per meter divisor)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jitter", type=float, default=0.0, help="HMR joint jitter sigma, meters")
    p.add_argument("--depth-bias", type=float, default=1.0, help="multiplicative HMR depth bias")
    p.add_argument("--slam-rot-noise", type=float, default=0.0, help="per-pose rotation noise, radians")
    p.add_argument("--slam-trans-noise", type=float, default=0.0, help="per-pose translation noise, meters")
    p.add_argument("--tilt", type=float, default=0.0, help="camera pitch toward the ground, degrees")
    p.add_argument("--camera-path", choices=[c.value for c in CameraPath])
    p.add_argument("--ground-points", type=int)
    p.add_argument("--wall-points", type=int)
    p.add_argument("--crop-contacts", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score predicted motion/trajectory against ground truth")
    p.add_argument("--pred-motion")
    p.add_argument("--gt-motion")
    p.add_argument("--pred-traj")
    p.add_argument("--gt-traj")
    p.add_argument("--rte-denominator", choices=["path", "net"], default="path")
    p.add_argument("--out", required=True, help="metrics report path (JSON)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the ablation variants on a scenario bundle")
    p.add_argument("--scenario", required=True, help="bundle directory with manifest.json")
    p.add_argument("--out", required=True, help="ablation table (CSV)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sweep-max-perp", type=_float_list, default=(), metavar="V,V,...",
                   help="extra rows, one per max ray-to-point distance (meters)")
    p.add_argument("--sweep-bin-height", type=_float_list, default=(), metavar="V,V,...",
                   help="extra rows, one per ground histogram bin height")
    p.set_defaults(func=cmd_ablate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CalibrationFailed as exc:
        _err(f"calibration failed: {exc}")
        return EXIT_METHOD
    except LengthMismatch as exc:
        _err(str(exc))
        return EXIT_METHOD
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
