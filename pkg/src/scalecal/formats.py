"""Readers and writers for trajectories, clouds, joint streams and reports.

The grammars are documented in docs/formats.md.  Readers never guess: any
malformed input raises :class:`ParseError` carrying the file and line.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from scalecal.geometry import (
    PointCloud,
    ScaleStatus,
    Trajectory,
    matrix_to_quat_xyzw,
    quat_xyzw_to_matrix,
)
from scalecal.motion import N_JOINTS, GlobalMotion, MotionSequence

FORMAT_VERSION = "1"
QUAT_NORM_RANGE = (0.9, 1.1)

PathLike = Union[str, os.PathLike]


class ParseError(ValueError):
    def __init__(self, path, line: Optional[int], message: str):
        self.path = str(path)
        self.line = line
        self.message = message
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class QuaternionNormError(ParseError):
    pass


class SchemaError(ParseError):
    pass


class UnsupportedFormat(ParseError):
    pass


def _fmt(x: float) -> str:
    # shortest text that reads back to the same double
    return repr(float(x))


# ---------------------------------------------------------------- TUM

def write_tum_trajectory(trajectory: Trajectory, path: PathLike) -> None:
    """Write ``timestamp tx ty tz qx qy qz qw`` lines.

    Position is the camera center and the quaternion is the camera-to-world
    rotation, as in the TUM RGB-D benchmark tools.
    """
    centers = trajectory.camera_centers()
    lines = [f"# scale_status: {trajectory.scale_status.value}", "# timestamp tx ty tz qx qy qz qw"]
    for t, R, c in zip(trajectory.timestamps, trajectory.rotations, centers):
        q = matrix_to_quat_xyzw(R.T)
        lines.append(" ".join(_fmt(v) for v in (t, *c, *q)))
    Path(path).write_text("\n".join(lines) + "\n")


def _float(tok, path, lineno, what="value"):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(path, lineno, f"cannot parse {what} {tok!r} as a number") from None
    if not math.isfinite(v):
        raise ParseError(path, lineno, f"non-finite {what} {tok!r}")
    return v


def _open_lines(path):
    try:
        return Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise FileNotFoundError(f"no such file: {path}") from None


def read_tum_trajectory(path: PathLike, scale_status: Optional[ScaleStatus] = None) -> Trajectory:
    """Read a TUM trajectory.  The scale status comes from the argument, else
    from a ``# scale_status:`` comment, else defaults to UnknownScale."""
    header_status = None
    ts, rots, trans = [], [], []
    for lineno, raw in enumerate(_open_lines(path), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("scale_status:"):
                value = body.split(":", 1)[1].strip()
                try:
                    header_status = ScaleStatus(value)
                except ValueError:
                    raise ParseError(path, lineno, f"unknown scale status {value!r}") from None
            continue
        fields = line.split()
        if len(fields) != 8:
            raise ParseError(path, lineno, f"expected 8 fields (timestamp tx ty tz qx qy qz qw), got {len(fields)}")
        vals = [_float(f, path, lineno) for f in fields]
        q = np.array(vals[4:])
        norm = float(np.linalg.norm(q))
        if not QUAT_NORM_RANGE[0] <= norm <= QUAT_NORM_RANGE[1]:
            raise QuaternionNormError(path, lineno, f"quaternion norm {norm:.6g} outside {list(QUAT_NORM_RANGE)}")
        if ts and vals[0] <= ts[-1]:
            raise ParseError(path, lineno, f"timestamp {vals[0]!r} does not increase")
        R = quat_xyzw_to_matrix(q / norm).T
        ts.append(vals[0])
        rots.append(R)
        trans.append(-R @ np.array(vals[1:4]))
    if not ts:
        raise ParseError(path, None, "trajectory has no poses")
    status = scale_status or header_status or ScaleStatus.UNKNOWN
    return Trajectory(np.array(ts), np.array(rots), np.array(trans), ScaleStatus(status))


# ---------------------------------------------------------------- PLY

def write_ply_cloud(cloud, path: PathLike) -> None:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    header = [
        "ply", "format ascii 1.0", f"element vertex {len(pts)}",
        "property double x", "property double y", "property double z", "end_header",
    ]
    body = [f"{_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in pts]
    Path(path).write_text("\n".join(header + body) + "\n")


def read_ply_cloud(path: PathLike) -> PointCloud:
    """Read the ``vertex`` element of an ASCII PLY file (x, y, z only)."""
    lines = _open_lines(path)
    if not lines or lines[0].strip() != "ply":
        raise ParseError(path, 1, "missing 'ply' magic line")
    elements = []  # [name, count, properties]
    lineno = 1
    fmt = None
    while True:
        if lineno >= len(lines):
            raise ParseError(path, lineno, "header ends without 'end_header'")
        tokens = lines[lineno].split()
        lineno += 1
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        key = tokens[0]
        if key == "format":
            if len(tokens) != 3:
                raise ParseError(path, lineno, "malformed format line")
            if tokens[1] != "ascii":
                raise UnsupportedFormat(path, lineno, f"{tokens[1]} PLY is not supported; convert to ascii")
            fmt = tokens[1]
        elif key == "element":
            if len(tokens) != 3 or not tokens[2].isdigit():
                raise ParseError(path, lineno, "malformed element line")
            elements.append([tokens[1], int(tokens[2]), []])
        elif key == "property":
            if not elements:
                raise ParseError(path, lineno, "property before any element")
            elements[-1][2].append(tokens[1:])
        elif key == "end_header":
            break
        else:
            raise ParseError(path, lineno, f"unknown header keyword {key!r}")
    if fmt is None:
        raise ParseError(path, lineno, "header has no format line")

    pts = None
    for name, count, props in elements:
        if name != "vertex":
            lineno += count
            continue
        if any(p[0] == "list" for p in props):
            raise UnsupportedFormat(path, lineno, "list properties on vertices are not supported")
        names = [p[-1] for p in props]
        missing = {"x", "y", "z"} - set(names)
        if missing:
            raise ParseError(path, lineno, f"vertex element lacks properties {sorted(missing)}")
        cols = [names.index(c) for c in ("x", "y", "z")]
        pts = np.empty((count, 3))
        for i in range(count):
            if lineno + i >= len(lines):
                raise ParseError(path, lineno + i + 1, f"expected {count} vertices, file ends after {i}")
            tokens = lines[lineno + i].split()
            if len(tokens) != len(names):
                raise ParseError(path, lineno + i + 1, f"expected {len(names)} values, got {len(tokens)}")
            pts[i] = [_float(tokens[c], path, lineno + i + 1) for c in cols]
        lineno += count
    if pts is None:
        raise ParseError(path, None, "no vertex element")
    return PointCloud(pts)


# ---------------------------------------------------------------- JSONL

def _frame_record(t, joints, orient, trans, theta, beta, extra=None) -> dict:
    rec = {
        "t": float(t),
        "joints": joints.tolist(),
        "root_orient": orient.tolist(),
        "root_trans": trans.tolist(),
    }
    if theta is not None:
        rec["theta"] = theta
    if beta is not None:
        rec["beta"] = beta
    if extra:
        rec.update(extra)
    return rec


def write_joints_jsonl(motion, path: PathLike) -> None:
    """One JSON object per frame.  ``GlobalMotion`` adds ``scale_used``."""
    extra = {"scale_used": float(motion.scale_used)} if isinstance(motion, GlobalMotion) else None
    with open(path, "w") as fh:
        for i in range(len(motion)):
            rec = _frame_record(motion.timestamps[i], motion.joints[i], motion.root_orient[i],
                                motion.root_trans[i], motion.theta[i], motion.beta[i], extra)
            fh.write(json.dumps(rec, allow_nan=False) + "\n")


def _vector(rec, key, shape, path, lineno):
    if key not in rec:
        raise SchemaError(path, lineno, f"missing required key {key!r}")
    try:
        arr = np.array(rec[key], dtype=np.float64)
    except (TypeError, ValueError):
        raise SchemaError(path, lineno, f"{key!r} must be numeric") from None
    if arr.shape != shape:
        raise SchemaError(path, lineno, f"{key!r} must have shape {list(shape)}, got {list(arr.shape)}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(path, lineno, f"{key!r} has non-finite values")
    return arr


def _read_records(path):
    out = []
    for lineno, raw in enumerate(_open_lines(path), start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(path, lineno, f"invalid JSON: {exc.msg}") from None
        if not isinstance(rec, dict):
            raise SchemaError(path, lineno, "each line must be a JSON object")
        t = rec.get("t")
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not math.isfinite(t):
            raise SchemaError(path, lineno, "'t' must be a finite number")
        if out and t <= out[-1][1]["t"]:
            raise ParseError(path, lineno, f"timestamp {t!r} does not increase")
        joints = rec.get("joints")
        if isinstance(joints, list) and len(joints) != N_JOINTS:
            raise SchemaError(path, lineno, f"expected {N_JOINTS} joints, got {len(joints)}")
        for key in ("theta", "beta"):
            if key in rec and rec[key] is not None and not isinstance(rec[key], list):
                raise SchemaError(path, lineno, f"{key!r} must be an array")
        arrays = (
            _vector(rec, "joints", (N_JOINTS, 3), path, lineno),
            _vector(rec, "root_orient", (3,), path, lineno),
            _vector(rec, "root_trans", (3,), path, lineno),
        )
        out.append((lineno, rec, arrays))
    if not out:
        raise ParseError(path, None, "no frames")
    return out


def _motion_kwargs(records):
    return dict(
        timestamps=[r["t"] for _, r, _ in records],
        joints=np.stack([a[0] for _, _, a in records]),
        root_orient=np.stack([a[1] for _, _, a in records]),
        root_trans=np.stack([a[2] for _, _, a in records]),
        theta=[r.get("theta") for _, r, _ in records],
        beta=[r.get("beta") for _, r, _ in records],
    )


def read_joints_jsonl(path: PathLike) -> MotionSequence:
    return MotionSequence(**_motion_kwargs(_read_records(path)))


def read_global_motion_jsonl(path: PathLike) -> GlobalMotion:
    records = _read_records(path)
    scales = {r.get("scale_used", 1.0) for _, r, _ in records}
    if len(scales) != 1:
        raise SchemaError(path, records[0][0], "'scale_used' differs between frames")
    return GlobalMotion(**_motion_kwargs(records), scale_used=float(scales.pop()))


# ---------------------------------------------------------------- report

def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def calibration_to_dict(result) -> dict:
    plane = None
    if result.plane is not None:
        plane = {"normal": [float(v) for v in result.plane.normal], "offset": float(result.plane.offset)}
    fit = None
    if result.ground_fit is not None:
        g = result.ground_fit
        fit = {"mode": g.mode.value, "support": g.support, "contact_rms": _num(g.contact_rms),
               "contacts_coplanar": g.contacts_coplanar}
    return {
        "sequence_scale": _num(result.sequence_scale),
        "scale_stddev": _num(result.scale_stddev),
        "n_valid": len(result.per_frame),
        "n_rejected": len(result.rejected_frames),
        "plane": plane,
        "ground_fit": fit,
        "plane_error": result.plane_error,
        "per_frame": [
            {
                "frame": f.frame_index,
                "joint": f.contact.joint_index,
                "scale": float(f.scale),
                "reference_kind": f.reference_kind.value,
                "reference_point": [float(v) for v in f.reference_point],
                "relative_depth": float(f.relative_depth),
                "absolute_depth": float(f.absolute_depth),
                "perp_distance": float(f.perp_distance),
            }
            for f in result.per_frame
        ],
        "rejected": [
            {"frame": r.frame_index, "joint": r.joint_index, "reason": r.reason.value, "detail": r.detail}
            for r in result.rejected_frames
        ],
    }


def build_report(calibration=None, metrics=None, extra: Optional[dict] = None) -> dict:
    report = {
        "format_version": FORMAT_VERSION,
        "calibration": calibration_to_dict(calibration) if calibration is not None else None,
        "metrics": {k: (_num(v) if isinstance(v, float) else v) for k, v in metrics.to_dict().items()}
        if metrics is not None else {},
    }
    if extra:
        report.update(extra)
    return report


def write_report_json(path: PathLike, calibration=None, metrics=None, extra: Optional[dict] = None) -> dict:
    """Write the run report.  Keys keep insertion order; floats are written
    with full round-trip precision.  Returns the written structure."""
    report = build_report(calibration, metrics, extra)
    Path(path).write_text(json.dumps(report, indent=2, allow_nan=False) + "\n")
    return report


def read_report_json(path: PathLike) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None


# ---------------------------------------------------------------- manifest

MANIFEST_NAME = "manifest.json"
_MANIFEST_KEYS = ("trajectory", "cloud", "joints", "gt_trajectory", "gt_motion")


@dataclass
class Manifest:
    """Paths of a bundle, relative to the manifest's directory."""

    trajectory: str
    cloud: str
    joints: str
    gt_trajectory: Optional[str] = None
    gt_motion: Optional[str] = None
    format_version: str = FORMAT_VERSION
    meta: Optional[dict] = None

    def resolve(self, root: PathLike, key: str) -> Optional[Path]:
        rel = getattr(self, key)
        return None if rel is None else Path(root) / rel


def write_manifest(manifest: Manifest, directory: PathLike) -> Path:
    d = {k: getattr(manifest, k) for k in _MANIFEST_KEYS}
    d["format_version"] = manifest.format_version
    d["meta"] = manifest.meta or {}
    out = Path(directory) / MANIFEST_NAME
    out.write_text(json.dumps(d, indent=2, allow_nan=False) + "\n")
    return out


def read_manifest(directory: PathLike) -> Manifest:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no manifest at {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(d, dict):
        raise SchemaError(path, None, "manifest must be a JSON object")
    if d.get("format_version") != FORMAT_VERSION:
        raise SchemaError(path, None, f"unsupported format_version {d.get('format_version')!r}")
    for key in ("trajectory", "cloud", "joints"):
        if not isinstance(d.get(key), str):
            raise SchemaError(path, None, f"missing path {key!r}")
    m = Manifest(**{k: d.get(k) for k in _MANIFEST_KEYS}, format_version=d["format_version"], meta=d.get("meta"))
    for key in _MANIFEST_KEYS:
        p = m.resolve(directory, key)
        if p is not None and not p.exists():
            raise FileNotFoundError(f"manifest entry {key!r} points to missing file {p}")
    return m
