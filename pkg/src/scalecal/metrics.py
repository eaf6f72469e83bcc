"""World-coordinate evaluation metrics for human and camera motion.

Human metrics report millimeters (inputs in meters), camera metrics meters.
"""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from scalecal.geometry import LengthMismatch, Trajectory, umeyama_align

SEGMENT_LENGTH = 100


class AlignMode(str, enum.Enum):
    SIM3 = "sim3"
    SE3 = "se3"


class ZeroDisplacement(ValueError):
    pass


@dataclass
class SegmentMetrics:
    start: int
    stop: int
    w_mpjpe_mm: float
    wa_mpjpe_mm: float


@dataclass
class MetricReport:
    w_mpjpe_mm: Optional[float] = None
    wa_mpjpe_mm: Optional[float] = None
    pa_mpjpe_mm: Optional[float] = None
    rte_percent: Optional[float] = None
    ate_m: Optional[float] = None
    ate_s_m: Optional[float] = None
    segment_count: int = 0
    per_segment: List[SegmentMetrics] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        d = dict(d)
        d["per_segment"] = [SegmentMetrics(**s) for s in d.get("per_segment", [])]
        return cls(**d)


def _check_lengths(pred, gt, minimum: int = 1):
    if len(pred) != len(gt):
        raise LengthMismatch(f"length mismatch: {len(pred)} predicted vs {len(gt)} ground-truth frames")
    if len(gt) < minimum:
        raise ValueError(f"need at least {minimum} frames, got {len(gt)}")


def trajectory_ate(pred: Trajectory, gt: Trajectory, mode=AlignMode.SIM3) -> float:
    """RMSE of camera positions after Sim(3) (ATE) or SE(3) (ATE-S) alignment."""
    mode = AlignMode(mode)
    _check_lengths(pred, gt, 3)
    p = pred.camera_centers()
    g = gt.camera_centers()
    tf = umeyama_align(p, g, with_scale=mode is AlignMode.SIM3)
    err = tf.apply(p) - g
    return float(np.sqrt(np.mean(np.sum(err ** 2, axis=1))))


def _joints(x) -> np.ndarray:
    return np.asarray(getattr(x, "joints", x), dtype=np.float64)


def mpjpe_pa(pred_frames, gt_frames) -> float:
    """Mean joint error (mm) after per-frame similarity Procrustes alignment."""
    pred, gt = _joints(pred_frames), _joints(gt_frames)
    _check_lengths(pred, gt)
    errs = []
    for p, g in zip(pred, gt):
        tf = umeyama_align(p, g, with_scale=True)
        errs.append(np.linalg.norm(tf.apply(p) - g, axis=1).mean())
    return float(np.mean(errs) * 1000.0)


def segments(n_frames: int, length: int = SEGMENT_LENGTH) -> List[range]:
    """Consecutive windows of ``length`` frames; a trailing window shorter
    than 2 frames is dropped."""
    out = []
    for start in range(0, n_frames, length):
        stop = min(start + length, n_frames)
        if stop - start >= 2:
            out.append(range(start, stop))
    return out


def _segment_errors(pj, gj, pr, gr, fit_frames: Optional[int]) -> np.ndarray:
    # per-frame mean joint error (m) after rigid alignment of root positions
    k = len(pr) if fit_frames is None else fit_frames
    tf = umeyama_align(pr[:k], gr[:k], with_scale=False)
    aligned = pj @ tf.rotation.T + tf.translation
    return np.linalg.norm(aligned - gj, axis=2).mean(axis=1)


def _windowed(pred, gt, fit_frames, length=SEGMENT_LENGTH):
    _check_lengths(pred, gt, 2)
    pj, gj = _joints(pred), _joints(gt)
    per_seg, frame_errs = [], []
    for seg in segments(len(gt), length):
        sl = slice(seg.start, seg.stop)
        e = _segment_errors(pj[sl], gj[sl], pred.root_trans[sl], gt.root_trans[sl], fit_frames)
        per_seg.append(float(e.mean() * 1000.0))
        frame_errs.append(e)
    return float(np.concatenate(frame_errs).mean() * 1000.0), per_seg


def mpjpe_w(pred, gt, length: int = SEGMENT_LENGTH) -> float:
    """MPJPE (mm) with each segment aligned by its first two root positions."""
    return _windowed(pred, gt, 2, length)[0]


def mpjpe_wa(pred, gt, length: int = SEGMENT_LENGTH) -> float:
    """MPJPE (mm) with each segment aligned by all of its root positions."""
    return _windowed(pred, gt, None, length)[0]


def root_errors(pred, gt) -> np.ndarray:
    """Per-frame root position error (m) after one rigid alignment of the
    whole root trajectory."""
    _check_lengths(pred, gt, 3)
    tf = umeyama_align(pred.root_trans, gt.root_trans, with_scale=False)
    return np.linalg.norm(tf.apply(pred.root_trans) - gt.root_trans, axis=1)


def rte(pred, gt, denominator: str = "path") -> float:
    """Root translation error in percent of the ground-truth displacement.

    ``denominator="path"`` normalizes by the cumulative path length,
    ``"net"`` by the straight-line distance from first to last frame.
    """
    err = root_errors(pred, gt)
    steps = np.diff(gt.root_trans, axis=0)
    if denominator == "path":
        dist = float(np.linalg.norm(steps, axis=1).sum())
    elif denominator == "net":
        dist = float(np.linalg.norm(gt.root_trans[-1] - gt.root_trans[0]))
    else:
        raise ValueError(f"unknown RTE denominator {denominator!r}")
    if dist < 1e-6:
        raise ZeroDisplacement(f"ground-truth displacement {dist:.3g} m is too small to normalize by")
    return float(100.0 * err.mean() / dist)


def evaluate(pred_motion=None, gt_motion=None, pred_traj: Optional[Trajectory] = None,
             gt_traj: Optional[Trajectory] = None, rte_denominator: str = "path") -> MetricReport:
    """Compute every metric whose inputs are available."""
    report = MetricReport()
    if pred_motion is not None and gt_motion is not None:
        _check_lengths(pred_motion, gt_motion, 2)
        w, w_seg = _windowed(pred_motion, gt_motion, 2)
        wa, wa_seg = _windowed(pred_motion, gt_motion, None)
        report.w_mpjpe_mm, report.wa_mpjpe_mm = w, wa
        report.pa_mpjpe_mm = mpjpe_pa(pred_motion, gt_motion)
        segs = segments(len(gt_motion))
        report.segment_count = len(segs)
        report.per_segment = [SegmentMetrics(s.start, s.stop, a, b) for s, a, b in zip(segs, w_seg, wa_seg)]
        if len(gt_motion) >= 3:
            try:
                report.rte_percent = rte(pred_motion, gt_motion, rte_denominator)
            except ZeroDisplacement:
                report.rte_percent = None
    if pred_traj is not None and gt_traj is not None:
        report.ate_m = trajectory_ate(pred_traj, gt_traj, AlignMode.SIM3)
        report.ate_s_m = trajectory_ate(pred_traj, gt_traj, AlignMode.SE3)
    return report
