"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--samples N] [--steps N] [--resolution N]
"""
import argparse
import time

import numpy as np

from bakerlab import ensemble, kernels
from bakerlab.analysis import capture_geometry
from bakerlab.mapcore import Params


def timed(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--steps", type=int, default=40)
    ap.add_argument("--resolution", type=int, default=128)
    ap.add_argument("--ell", type=float, default=0.2)
    args = ap.parse_args()

    params = Params(args.ell)
    pts = ensemble.sample_points(ensemble.UNIFORM, args.samples, 1)
    xs, ys = np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])
    grid = ensemble.cell_centers(args.resolution)
    gx, gy = np.ascontiguousarray(grid[:, 0]), np.ascontiguousarray(grid[:, 1])
    geom = capture_geometry(params)

    print(f"backends available: {sorted(kernels.BACKENDS)} (default: {kernels.BACKEND})")
    results = {}
    for name in sorted(kernels.BACKENDS):
        k = kernels.get(name)
        t_net, counts = timed(k.net_counts, xs, ys, params.ell, 0, args.steps)
        t_cls, (codes, steps) = timed(k.classify, gx, gy, params.ell, 100_000, 1e-9, geom, repeat=1)
        results[name] = (counts, codes, steps)
        rate = args.samples * args.steps / t_net / 1e6
        print(f"{name:>9}: net_counts {t_net:8.3f} s ({rate:7.1f} Mstep/s)   "
              f"classify {args.resolution}^2 {t_cls:8.3f} s")
    if len(results) == 2:
        a, b = results.values()
        same = all(np.array_equal(u, v) for u, v in zip(a, b))
        print(f"outputs bit-identical: {same}")


if __name__ == "__main__":
    main()
