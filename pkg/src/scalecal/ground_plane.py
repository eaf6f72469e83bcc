"""Ground plane estimation for frames whose contact point is not in the cloud.

Returned planes are oriented so that the camera side is negative
(``n @ c + b < 0`` for camera centers ``c``): a ray cast from a camera toward
the ground then has ``n @ d > 0`` and a positive hit parameter.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from scalecal import kernels
from scalecal.geometry import Plane, PointCloud


class PlaneFitError(ValueError):
    pass


class DegenerateContacts(PlaneFitError):
    pass


class NoQualifiedBin(PlaneFitError):
    pass


class DegenerateCloud(PlaneFitError):
    pass


class NormalMode(str, enum.Enum):
    CONTACTS = "contacts"
    Y_AXIS = "y-axis"
    RANSAC = "ransac"


@dataclass(frozen=True)
class PlaneFitConfig:
    bin_height: float = 0.10
    min_bin_fraction: float = 0.05
    ransac_iters: int = 1000
    ransac_tol: float = 0.05

    def __post_init__(self):
        if not self.bin_height > 0:
            raise ValueError("bin_height must be positive")
        if not 0 < self.min_bin_fraction <= 1:
            raise ValueError("min_bin_fraction must lie in (0, 1]")
        if self.ransac_iters < 1 or not self.ransac_tol > 0:
            raise ValueError("ransac_iters and ransac_tol must be positive")


@dataclass(frozen=True)
class GroundFit:
    plane: Plane
    mode: NormalMode
    support: int
    contact_rms: Optional[float] = None
    contacts_coplanar: Optional[bool] = None


def _points(cloud) -> np.ndarray:
    return cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64).reshape(-1, 3)


def _contact_fit(contacts_world):
    pts = np.asarray(contacts_world, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 3:
        raise DegenerateContacts(f"need at least 3 contact points, got {len(pts)}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    evals, evecs = np.linalg.eigh(centered.T @ centered / len(pts))
    if evals[1] < 1e-12:
        raise DegenerateContacts("contact points are collinear or coincident; normal is not unique")
    return evecs[:, 0], centroid, centered


def normal_from_contacts(contacts_world, camera_centers=None) -> np.ndarray:
    """Unit normal of the least-squares plane through the contact points.

    The sign makes the normal point away from the cameras (mean of
    ``camera_centers``, or the world origin when not given).
    """
    n, centroid, _ = _contact_fit(contacts_world)
    cam = np.zeros(3) if camera_centers is None else np.asarray(camera_centers, dtype=np.float64).reshape(-1, 3).mean(axis=0)
    if n @ (cam - centroid) > 0:
        n = -n
    return n


def normal_y_axis() -> np.ndarray:
    return np.array([0.0, 1.0, 0.0])


def offset_along_normal(cloud, n, cfg: PlaneFitConfig = PlaneFitConfig(), return_mask: bool = False):
    """Offset ``b`` of the lowest well-populated layer of the cloud along ``n``.

    ``n`` is taken to point from the ground toward the cameras, so the ground
    lies at the smallest projections ``n @ x``.  Projections are binned by
    ``cfg.bin_height``; the lowest bin holding at least
    ``cfg.min_bin_fraction`` of the points seeds a window of half-width
    ``bin_height / 2`` that is re-centered on the median of its members until
    it settles.  Returns ``b = -center`` (and the window mask on request).
    """
    pts = _points(cloud)
    if len(pts) < 10:
        raise ValueError(f"offset estimation needs at least 10 cloud points, got {len(pts)}")
    n = np.asarray(n, dtype=np.float64)
    n = n / np.linalg.norm(n)
    proj = pts @ n
    h = cfg.bin_height
    bins = np.floor((proj - proj.min()) / h).astype(np.int64)
    counts = np.bincount(bins)
    qualified = np.flatnonzero(counts >= cfg.min_bin_fraction * len(pts))
    if len(qualified) == 0:
        raise NoQualifiedBin(
            f"no {h:g}-thick layer holds {cfg.min_bin_fraction:.0%} of the {len(pts)} points"
        )
    center = float(np.median(proj[bins == qualified[0]]))
    for _ in range(100):
        window = np.abs(proj - center) <= h / 2
        new_center = float(np.median(proj[window]))
        if new_center == center:
            break
        center = new_center
    window = np.abs(proj - center) <= h / 2
    if return_mask:
        return -center, window
    return -center


def _sample_hypotheses(pts, iters, rng):
    idx = rng.integers(0, len(pts), size=(iters, 3))
    p0, p1, p2 = pts[idx[:, 0]], pts[idx[:, 1]], pts[idx[:, 2]]
    e1, e2 = p1 - p0, p2 - p0
    normals = np.cross(e1, e2)
    norm = np.linalg.norm(normals, axis=1)
    valid = norm > 1e-12 * np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
    valid &= norm > 0
    normals = normals[valid] / norm[valid, None]
    offsets = -np.einsum("ij,ij->i", normals, p0[valid])
    return normals, offsets


def ransac_largest_plane(cloud, cfg: PlaneFitConfig = PlaneFitConfig(), seed: int = 0) -> Plane:
    """Plane with the most points within ``cfg.ransac_tol``, refit on its inliers.

    Hypotheses come from ``cfg.ransac_iters`` random point triples drawn with
    ``numpy.random.default_rng(seed)``; ties go to the earliest hypothesis.
    """
    pts = _points(cloud)
    if len(pts) < 3:
        raise DegenerateCloud(f"need at least 3 points, got {len(pts)}")
    rng = np.random.default_rng(seed)
    normals, offsets = _sample_hypotheses(pts, cfg.ransac_iters, rng)
    if len(normals) == 0:
        raise DegenerateCloud("no non-collinear 3-point sample found")
    counts = kernels.count_plane_inliers(pts, normals, offsets, cfg.ransac_tol)
    best = int(np.argmax(counts))
    n0, b0 = normals[best], offsets[best]
    inliers = pts[np.abs(pts @ n0 + b0) <= cfg.ransac_tol]
    if len(inliers) >= 3:
        centroid = inliers.mean(axis=0)
        _, s, vt = np.linalg.svd(inliers - centroid)
        if s[1] > 1e-12 * max(s[0], 1e-300):
            n = vt[2] if vt[2] @ n0 >= 0 else -vt[2]
            return Plane.from_point_normal(centroid, n)
    return Plane(n0, b0)


def fit_ground_plane(contacts_world, cloud, mode, cfg: PlaneFitConfig = PlaneFitConfig(),
                     seed: int = 0, camera_centers=None) -> GroundFit:
    """Fit the ground plane with the requested normal strategy.

    ``contacts``: least-squares normal through the contact joints, offset from
    the cloud.  ``y-axis``: normal fixed to the world y axis, offset from the
    cloud.  ``ransac``: largest plane in the cloud.
    """
    mode = NormalMode(mode)
    pts = _points(cloud)
    cams = np.zeros((1, 3)) if camera_centers is None else np.asarray(camera_centers, dtype=np.float64).reshape(-1, 3)
    cam = cams.mean(axis=0)

    if mode is NormalMode.RANSAC:
        plane = ransac_largest_plane(pts, cfg, seed)
        if plane.normal @ cam + plane.offset > 0:
            plane = plane.flipped()
        support = int(np.count_nonzero(np.abs(plane.signed_distance(pts)) <= cfg.ransac_tol))
        return GroundFit(plane, mode, support)

    rms = coplanar = None
    if mode is NormalMode.CONTACTS:
        n_down, centroid, centered = _contact_fit(contacts_world)
        if n_down @ (cam - centroid) > 0:
            n_down = -n_down
        resid = centered @ n_down
        rms = float(np.sqrt(np.mean(resid ** 2)))
        coplanar = bool(np.abs(resid).max() <= cfg.bin_height / 2)
    else:
        n_down = normal_y_axis()
        if contacts_world is not None and len(contacts_world):
            contacts = np.asarray(contacts_world, dtype=np.float64).reshape(-1, 3)
            if n_down @ (cam - contacts.mean(axis=0)) > 0:
                n_down = -n_down
    b_up, window = offset_along_normal(pts, -n_down, cfg, return_mask=True)
    plane = Plane(n_down, -b_up)
    return GroundFit(plane, mode, int(np.count_nonzero(window)), rms, coplanar)


def plane_angle(a: Plane, b: Plane) -> float:
    """Angle in radians between two plane normals, ignoring orientation."""
    c = abs(float(a.normal @ b.normal))
    return math.acos(min(1.0, c))
