"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--points 20000] [--rays 500] [--repeat 5]

Prints the best-of-N wall time per kernel and backend, the speedup, and
whether the two backends agree.
"""
import argparse
import time

import numpy as np

from scalecal import _kernels_py

try:
    from scalecal import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--rays", type=int, default=500)
    ap.add_argument("--planes", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    pts = np.ascontiguousarray(rng.normal(size=(args.points, 3)) * 5)
    origins = np.ascontiguousarray(rng.normal(size=(args.rays, 3)))
    dirs = rng.normal(size=(args.rays, 3))
    dirs = np.ascontiguousarray(dirs / np.linalg.norm(dirs, axis=1, keepdims=True))
    normals = rng.normal(size=(args.planes, 3))
    normals = np.ascontiguousarray(normals / np.linalg.norm(normals, axis=1, keepdims=True))
    offsets = np.ascontiguousarray(rng.normal(size=args.planes))

    cases = {
        "nearest_to_ray": lambda k: k.nearest_to_ray(pts, origins[0], dirs[0]),
        "nearest_to_rays": lambda k: k.nearest_to_rays(pts, origins, dirs),
        "count_plane_inliers": lambda k: k.count_plane_inliers(pts, normals, offsets, 0.05),
    }
    print(f"{args.points} points, {args.rays} rays, {args.planes} planes, best of {args.repeat}")
    print(f"{'kernel':<22}{'python s':>12}{'cython s':>12}{'speedup':>10}  agree")
    for name, call in cases.items():
        tp, outp = best_time(lambda: call(_kernels_py), args.repeat)
        if _kernels_c is None:
            print(f"{name:<22}{tp:>12.5f}{'-':>12}{'-':>10}  -")
            continue
        tc, outc = best_time(lambda: call(_kernels_c), args.repeat)
        agree = all(np.allclose(np.asarray(a), np.asarray(b), rtol=0, atol=1e-9)
                    for a, b in zip(np.atleast_1d(outp) if not isinstance(outp, tuple) else outp,
                                    np.atleast_1d(outc) if not isinstance(outc, tuple) else outc))
        print(f"{name:<22}{tp:>12.5f}{tc:>12.5f}{tp / tc:>9.1f}x  {'yes' if agree else 'NO'}")
    if _kernels_c is None:
        print("compiled extension not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
