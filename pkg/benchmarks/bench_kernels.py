#!/usr/bin/env python3
"""Head-to-head timing of the numba kernels against the numpy fallback.

Workload sizes mirror the production hot spots: per-patch NN search over a
backbone-sized layer, greedy coreset selection of a full cell, pooling,
blur, and resize at anomaly-map resolution.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from patchmem.kernels import numba_impl, numpy_impl


def _timeit(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    test_vecs = rng.standard_normal((784, 512))
    keys = rng.standard_normal((160, 512))
    cell = rng.standard_normal((1600, 512))
    fmap = rng.standard_normal((512, 28, 28)).astype(np.float32)
    grid = rng.standard_normal((224, 224))
    native = rng.standard_normal((28, 28))

    cases = [
        ("nn_search 784x160x512 b=4", lambda impl: impl.nn_search(test_vecs, keys, 4)),
        ("greedy_select 1600->160 d=512", lambda impl: impl.greedy_select(cell, 160, 0)),
        ("avg_pool3x3 512x28x28", lambda impl: impl.avg_pool3x3(fmap)),
        ("gaussian_blur 224x224 sigma=4", lambda impl: impl.gaussian_blur(grid, 4.0)),
        ("bilinear_resize 28->224", lambda impl: impl.bilinear_resize(native, 224, 224)),
    ]

    # trigger JIT compilation outside the timed region
    for _, fn in cases:
        fn(numba_impl)

    print(f"{'kernel':<34} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, fn in cases:
        t_np = _timeit(lambda: fn(numpy_impl), args.repeats)
        t_nb = _timeit(lambda: fn(numba_impl), args.repeats)
        print(f"{name:<34} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
