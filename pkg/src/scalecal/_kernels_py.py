"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Arithmetic is written component by component so results match the compiled
loops exactly (no BLAS reductions, same operation order).
"""
import numpy as np

_CHUNK = 64


def _perp2_along(points, origin, direction):
    vx = points[:, 0] - origin[0]
    vy = points[:, 1] - origin[1]
    vz = points[:, 2] - origin[2]
    along = vx * direction[0] + vy * direction[1] + vz * direction[2]
    wx = vx - along * direction[0]
    wy = vy - along * direction[1]
    wz = vz - along * direction[2]
    perp2 = wx * wx + wy * wy + wz * wz
    perp2[~(along > 0.0)] = np.inf
    return perp2, along


def nearest_to_ray(points, origin, direction):
    if len(points) == 0:
        return None
    perp2, along = _perp2_along(points, origin, direction)
    i = int(np.argmin(perp2))
    if not perp2[i] < np.inf:
        return None
    return i, float(np.sqrt(perp2[i])), float(along[i])


def nearest_to_rays(points, origins, directions):
    m = len(origins)
    idx = np.full(m, -1, dtype=np.int64)
    perp = np.full(m, np.inf)
    along = np.zeros(m)
    for j in range(m):
        hit = nearest_to_ray(points, origins[j], directions[j])
        if hit is not None:
            idx[j], perp[j], along[j] = hit
    return idx, perp, along


def count_plane_inliers(points, normals, offsets, tol):
    counts = np.zeros(len(normals), dtype=np.int64)
    x = points[:, 0:1]
    y = points[:, 1:2]
    z = points[:, 2:3]
    for k0 in range(0, len(normals), _CHUNK):
        nrm = normals[k0:k0 + _CHUNK]
        d = x * nrm[:, 0] + y * nrm[:, 1] + z * nrm[:, 2] + offsets[k0:k0 + _CHUNK]
        counts[k0:k0 + _CHUNK] = (np.abs(d) <= tol).sum(axis=0)
    return counts
