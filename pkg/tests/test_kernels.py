import numpy as np
import pytest

from oracles import count_inliers_exhaustive, nearest_to_ray_exhaustive
from scalecal import kernels
from conftest import BACKENDS


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _random_case(rng):
    pts = rng.normal(size=(int(rng.integers(1, 200)), 3)) * rng.uniform(0.1, 10)
    d = rng.normal(size=3)
    return pts, rng.normal(size=3), d / np.linalg.norm(d)


def test_nearest_matches_exhaustive(backend, rng):
    for _ in range(300):
        pts, o, d = _random_case(rng)
        got = backend.nearest_to_ray(_c(pts), _c(o), _c(d))
        want = nearest_to_ray_exhaustive(pts, o, d)
        if want is None:
            assert got is None
            continue
        assert got[0] == want[0]
        assert got[1] == pytest.approx(want[1], abs=1e-12)
        assert got[2] == pytest.approx(want[2], abs=1e-12)


def test_nearest_ties_go_to_lowest_index(backend):
    pts = _c([[1.0, 0, 5], [-1.0, 0, 5], [0, 1.0, 5]])
    idx, perp, _ = backend.nearest_to_ray(pts, _c([0, 0, 0]), _c([0, 0, 1]))
    assert idx == 0 and perp == 1.0


def test_nearest_excludes_points_behind_and_at_origin(backend):
    pts = _c([[0, 0, -1.0], [0, 0, 0.0]])
    assert backend.nearest_to_ray(pts, _c([0, 0, 0]), _c([0, 0, 1])) is None


def test_batched_agrees_with_single(backend, rng):
    pts = rng.normal(size=(150, 3))
    dirs = rng.normal(size=(40, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = rng.normal(size=(40, 3)) * 3
    idx, perp, along = backend.nearest_to_rays(_c(pts), _c(origins), _c(dirs))
    for k in range(40):
        one = backend.nearest_to_ray(_c(pts), _c(origins[k]), _c(dirs[k]))
        if one is None:
            assert idx[k] == -1 and np.isinf(perp[k])
        else:
            assert (idx[k], perp[k], along[k]) == one


def test_inlier_counts_match_exhaustive(backend, rng):
    pts = rng.normal(size=(120, 3))
    normals = rng.normal(size=(70, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    offsets = rng.normal(size=70) * 0.3
    counts = backend.count_plane_inliers(_c(pts), _c(normals), _c(offsets), 0.2)
    want = [count_inliers_exhaustive(pts, n, b, 0.2) for n, b in zip(normals, offsets)]
    assert list(counts) == want


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
def test_backends_bit_identical(rng):
    (_, py), (_, cy) = BACKENDS
    for _ in range(50):
        pts, o, d = _random_case(rng)
        assert py.nearest_to_ray(_c(pts), _c(o), _c(d)) == cy.nearest_to_ray(_c(pts), _c(o), _c(d))
    pts = rng.normal(size=(500, 3))
    normals = rng.normal(size=(200, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    offsets = rng.normal(size=200)
    assert np.array_equal(py.count_plane_inliers(pts, normals, offsets, 0.05),
                          cy.count_plane_inliers(pts, normals, offsets, 0.05))


def test_selector_reports_backend():
    assert kernels.BACKEND in ("cython", "python")


def test_pure_python_env_forces_fallback():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "import scalecal.kernels as k; print(k.BACKEND)"],
        env={"SCALECAL_PURE_PYTHON": "1", "PATH": ""}, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
