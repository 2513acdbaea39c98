#!/usr/bin/env python3
"""Benchmark the numba and numpy smoothing kernels against each other.

The local linear evaluation is the hot loop of the whole package: every
Newton trial step inside every outer iteration (and every bootstrap or
Monte Carlo replicate on top) re-evaluates the link at n index values,
each an O(n) kernel sum. This script times both backends on that kernel
and on one end-to-end fit.

Usage: python benchmarks/bench_smoother.py [--n 400] [--repeats 50]
"""

import argparse
import time

import numpy as np

from lpresim import _kernels_numpy

try:
    from lpresim import _kernels_numba

    HAVE_NUMBA = True
except ImportError:
    _kernels_numba = None
    HAVE_NUMBA = False


def time_call(fn, *args, repeats=50):
    fn(*args)  # warm-up (JIT compile, cache touch)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(n, repeats):
    rng = np.random.default_rng(0)
    t = rng.standard_normal(n)
    w = np.sin(t) + 0.1 * rng.standard_normal(n)
    z = rng.standard_normal(n)
    h, h1 = 0.3, 0.5

    rows = []
    for name, mod in [("numpy", _kernels_numpy)] + (
        [("numba", _kernels_numba)] if HAVE_NUMBA else []
    ):
        dt_eval = time_call(mod.ll_both, t, w, z, h, h1, 0, repeats=repeats)
        dt_diag = time_call(mod.ll_fit_diag, t, w, h, 0, repeats=repeats)
        rows.append((name, dt_eval, dt_diag))
    return rows


def bench_fit(n):
    from lpresim import gen_data, two_stage_fit
    from lpresim.simulation import DEFAULT_BETA0, ErrorLaw

    data = gen_data(n, DEFAULT_BETA0, ErrorLaw.LOGNORMAL, seed=7)
    two_stage_fit(data)  # warm-up
    t0 = time.perf_counter()
    two_stage_fit(data)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--repeats", type=int, default=50)
    args = ap.parse_args()

    print(f"local linear kernels, n = m = {args.n} (best of {args.repeats}):")
    base = None
    for name, dt_eval, dt_diag in bench_kernels(args.n, args.repeats):
        if base is None:
            base = dt_eval
        print(
            f"  {name:6s}  ll_both: {dt_eval * 1e3:8.3f} ms   "
            f"ll_fit_diag: {dt_diag * 1e3:8.3f} ms   "
            f"speedup vs numpy: {base / dt_eval:5.2f}x"
        )

    from lpresim import active_backend

    dt = bench_fit(args.n)
    print(f"end-to-end two_stage_fit (backend={active_backend()}, n={args.n}): {dt:.3f} s")
    if not HAVE_NUMBA:
        print("numba not importable; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
