"""Calibrate-compose-evaluate pipeline and the ablation variants."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional

from scalecal.calibration import CalibrationConfig, CalibrationFailed, CalibrationResult, calibrate_sequence
from scalecal.geometry import PointCloud, Trajectory
from scalecal.ground_plane import NormalMode
from scalecal.metrics import MetricReport, evaluate
from scalecal.motion import FEET, HEAD, PELVIS, GlobalMotion, MotionSequence, apply_scale, compose_global_motion


@dataclass
class PipelineOutput:
    scale: float
    calibration: Optional[CalibrationResult]
    metric_trajectory: Trajectory
    global_motion: GlobalMotion


def run_pipeline(motion: MotionSequence, trajectory: Trajectory, cloud: PointCloud,
                 cfg: Optional[CalibrationConfig] = CalibrationConfig()) -> PipelineOutput:
    """Calibrate (``cfg=None`` skips it and uses scale 1), rescale the
    trajectory and compose world-frame human motion."""
    result = None
    scale = 1.0
    if cfg is not None:
        result = calibrate_sequence(motion, trajectory, cloud, cfg)
        scale = result.sequence_scale
    metric = apply_scale(trajectory, scale)
    return PipelineOutput(scale, result, metric, compose_global_motion(motion, metric, scale))


@dataclass(frozen=True)
class Variant:
    name: str
    config: Optional[CalibrationConfig]


def ablation_variants(base: CalibrationConfig = CalibrationConfig()) -> List[Variant]:
    """Reference-joint and plane-fitting variants, in table order."""
    return [
        Variant("w/o calibration", None),
        Variant("head-fixed", replace(base, reference_joints=(HEAD,))),
        Variant("pelvis-fixed", replace(base, reference_joints=(PELVIS,))),
        Variant("feet-fixed", replace(base, reference_joints=FEET)),
        Variant("contact", replace(base, reference_joints=None)),
        Variant("fit:none", replace(base, normal_mode=None)),
        Variant("fit:ransac", replace(base, normal_mode=NormalMode.RANSAC)),
        Variant("fit:y-axis", replace(base, normal_mode=NormalMode.Y_AXIS)),
        Variant("fit:contacts", replace(base, normal_mode=NormalMode.CONTACTS)),
    ]


def sweep_variants(base: CalibrationConfig = CalibrationConfig(), max_perp=(), bin_height=()) -> List[Variant]:
    """Extra rows that vary one tuning parameter of the contact variant."""
    out = [Variant(f"max-perp={v:g}", replace(base, max_perp_distance=float(v))) for v in max_perp]
    out += [Variant(f"bin-height={v:g}", replace(base, plane_bin_height=float(v))) for v in bin_height]
    return out


ABLATION_COLUMNS = (
    "variant", "status", "scale", "n_valid", "n_rejected", "n_plane",
    "w_mpjpe_mm", "wa_mpjpe_mm", "pa_mpjpe_mm", "rte_percent", "ate_m", "ate_s_m",
)


@dataclass
class AblationRow:
    variant: str
    status: str
    scale: Optional[float] = None
    n_valid: Optional[int] = None
    n_rejected: Optional[int] = None
    n_plane: Optional[int] = None
    metrics: Optional[MetricReport] = None

    def as_record(self) -> dict:
        rec = {"variant": self.variant, "status": self.status, "scale": self.scale,
               "n_valid": self.n_valid, "n_rejected": self.n_rejected, "n_plane": self.n_plane}
        m = self.metrics or MetricReport()
        for key in ABLATION_COLUMNS[6:]:
            rec[key] = getattr(m, key)
        return rec


def run_variant(variant: Variant, motion, trajectory, cloud, gt_motion, gt_trajectory) -> AblationRow:
    try:
        out = run_pipeline(motion, trajectory, cloud, variant.config)
    except CalibrationFailed as exc:
        r = exc.result
        return AblationRow(variant.name, "failed", None,
                           len(r.per_frame) if r else 0, len(r.rejected_frames) if r else None)
    report = evaluate(out.global_motion, gt_motion, out.metric_trajectory, gt_trajectory)
    cal = out.calibration
    if cal is None:
        return AblationRow(variant.name, "ok", out.scale, metrics=report)
    n_plane = sum(f.reference_kind.value == "PlaneIntersection" for f in cal.per_frame)
    return AblationRow(variant.name, "ok", out.scale, len(cal.per_frame), len(cal.rejected_frames), n_plane, report)


def thread_count() -> int:
    """Worker count from ``SCALECAL_THREADS`` (unset or 0 means one per CPU)."""
    raw = os.environ.get("SCALECAL_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"SCALECAL_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("SCALECAL_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def run_ablation(motion, trajectory, cloud, gt_motion, gt_trajectory,
                 variants: Optional[List[Variant]] = None, threads: Optional[int] = None) -> List[AblationRow]:
    """Run every variant; rows come back in variant order whatever the
    thread count."""
    variants = ablation_variants() if variants is None else variants
    threads = thread_count() if threads is None else threads
    args = (motion, trajectory, cloud, gt_motion, gt_trajectory)
    if threads <= 1:
        return [run_variant(v, *args) for v in variants]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda v: run_variant(v, *args), variants))
