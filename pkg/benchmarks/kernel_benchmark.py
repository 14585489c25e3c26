#!/usr/bin/env python3
"""Benchmark the compiled SGD kernels against the numpy fallback.

The hot loop of the simulator is per-batch local SGD on small models, where
Python dispatch overhead dominates; this script times both backends on the
same workload and reports the speedup.

Usage: python benchmarks/kernel_benchmark.py [--steps 20000] [--batch 8]
"""

import argparse
import time

import numpy as np

from fedcohort import _kernels_py

try:
    from fedcohort import _kernels
except ImportError:
    _kernels = None


def make_plan(n, batch, steps, rng):
    per_epoch = -(-n // batch)
    epochs = -(-steps // per_epoch)
    order = np.concatenate([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)
    starts, ends = [], []
    for e in range(epochs):
        for lo in range(0, n, batch):
            if len(starts) == steps:
                break
            starts.append(e * n + lo)
            ends.append(e * n + min(lo + batch, n))
    return order, np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64)


def workloads(steps, batch, rng):
    n, d, h, c = 64, 16, 16, 4
    x = rng.standard_normal((n, d))
    y_real = rng.standard_normal(n)
    y_cls = rng.integers(0, c, n).astype(np.int64)
    order, starts, ends = make_plan(n, batch, steps, rng)

    yield ("linear", lambda mod: mod.sgd_linear(
        rng.standard_normal(d).copy(), np.zeros(1), x, y_real, 0.01, order, starts, ends))
    yield ("softmax", lambda mod: mod.sgd_softmax(
        rng.standard_normal((d, c)).copy(), np.zeros(c), x, y_cls, 0.01, order, starts, ends))
    yield ("mlp", lambda mod: mod.sgd_mlp(
        rng.standard_normal((d, h)).copy(), np.zeros(h),
        rng.standard_normal((h, c)).copy(), np.zeros(c),
        x, y_cls.astype(np.float64), 0.01, order, starts, ends, True))


def time_call(fn, mod, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(mod)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=20_000, help="SGD steps per kernel")
    parser.add_argument("--batch", type=int, default=8)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    print(f"{args.steps} steps, batch {args.batch}, model dims d=16 h=16 c=4")
    print(f"{'kernel':<10} {'numpy':>12} {'compiled':>12} {'speedup':>9}")
    for name, call in workloads(args.steps, args.batch, rng):
        t_py = time_call(call, _kernels_py)
        if _kernels is None:
            print(f"{name:<10} {t_py * 1e3:>10.1f}ms {'n/a':>12} {'n/a':>9}")
            continue
        t_c = time_call(call, _kernels)
        print(f"{name:<10} {t_py * 1e3:>10.1f}ms {t_c * 1e3:>10.1f}ms {t_py / t_c:>8.1f}x")
    if _kernels is None:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
