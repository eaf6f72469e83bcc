# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.  Must stay bit-compatible with ``_kernels_py``."""
import numpy as np
from libc.math cimport sqrt, fabs, INFINITY


cdef inline Py_ssize_t _nearest(const double[:, ::1] pts, double ox, double oy, double oz,
                                double dx, double dy, double dz,
                                double *perp2_out, double *along_out) noexcept nogil:
    cdef Py_ssize_t i, best = -1
    cdef double vx, vy, vz, along, wx, wy, wz, perp2
    cdef double best_perp2 = INFINITY, best_along = 0.0
    for i in range(pts.shape[0]):
        vx = pts[i, 0] - ox
        vy = pts[i, 1] - oy
        vz = pts[i, 2] - oz
        along = vx * dx + vy * dy + vz * dz
        if not along > 0.0:
            continue
        wx = vx - along * dx
        wy = vy - along * dy
        wz = vz - along * dz
        perp2 = wx * wx + wy * wy + wz * wz
        if perp2 < best_perp2:
            best = i
            best_perp2 = perp2
            best_along = along
    perp2_out[0] = best_perp2
    along_out[0] = best_along
    return best


def nearest_to_ray(const double[:, ::1] points, const double[::1] origin, const double[::1] direction):
    cdef double perp2, along
    cdef Py_ssize_t best
    with nogil:
        best = _nearest(points, origin[0], origin[1], origin[2],
                        direction[0], direction[1], direction[2], &perp2, &along)
    if best < 0:
        return None
    return int(best), sqrt(perp2), along


def nearest_to_rays(const double[:, ::1] points, const double[:, ::1] origins, const double[:, ::1] directions):
    cdef Py_ssize_t m = origins.shape[0], j
    idx = np.full(m, -1, dtype=np.int64)
    perp = np.full(m, np.inf)
    along = np.zeros(m)
    cdef long long[::1] idx_v = idx
    cdef double[::1] perp_v = perp
    cdef double[::1] along_v = along
    cdef double p2, a
    with nogil:
        for j in range(m):
            idx_v[j] = _nearest(points, origins[j, 0], origins[j, 1], origins[j, 2],
                                directions[j, 0], directions[j, 1], directions[j, 2], &p2, &a)
            if idx_v[j] >= 0:
                perp_v[j] = sqrt(p2)
                along_v[j] = a
    return idx, perp, along


def count_plane_inliers(const double[:, ::1] points, const double[:, ::1] normals,
                        const double[::1] offsets, double tol):
    cdef Py_ssize_t k, i, n = points.shape[0], m = normals.shape[0]
    counts = np.zeros(m, dtype=np.int64)
    cdef long long[::1] c = counts
    cdef double nx, ny, nz, b
    cdef long long acc
    with nogil:
        for k in range(m):
            nx = normals[k, 0]
            ny = normals[k, 1]
            nz = normals[k, 2]
            b = offsets[k]
            acc = 0
            for i in range(n):
                if fabs(points[i, 0] * nx + points[i, 1] * ny + points[i, 2] * nz + b) <= tol:
                    acc += 1
            c[k] = acc
    return counts
