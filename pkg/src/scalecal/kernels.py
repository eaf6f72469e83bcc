"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
fallback is loaded.  Set ``SCALECAL_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from scalecal import _kernels_py

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("SCALECAL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from scalecal import _kernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def nearest_to_ray(points, origin, direction):
    return _impl.nearest_to_ray(_c(points), _c(origin), _c(direction))


def nearest_to_rays(points, origins, directions):
    return _impl.nearest_to_rays(_c(points), _c(origins).reshape(-1, 3), _c(directions).reshape(-1, 3))


def count_plane_inliers(points, normals, offsets, tol):
    return _impl.count_plane_inliers(_c(points), _c(normals).reshape(-1, 3), _c(offsets).reshape(-1), float(tol))
