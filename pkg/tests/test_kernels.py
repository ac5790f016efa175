"""Backend equivalence: the numba kernels and the numpy fallback must agree
on every observable (indices exactly; floats to rounding)."""

import numpy as np
import pytest

from patchmem.kernels import numba_impl, numpy_impl


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(2024)


def test_greedy_select_identical(rng):
    for _ in range(30):
        n = int(rng.integers(1, 80))
        d = int(rng.integers(1, 12))
        k = int(rng.integers(1, n + 1))
        x = rng.standard_normal((n, d))
        start = int(rng.integers(0, n))
        a = numpy_impl.greedy_select(x, k, start)
        b = numba_impl.greedy_select(x, k, start)
        assert np.array_equal(a, b)


def test_assign_nearest_identical(rng):
    for _ in range(20):
        x = rng.standard_normal((int(rng.integers(1, 60)), 5))
        keys = rng.standard_normal((int(rng.integers(1, 12)), 5))
        assert np.array_equal(
            numpy_impl.assign_nearest(x, keys), numba_impl.assign_nearest(x, keys)
        )


def test_nn_search_close(rng):
    for _ in range(20):
        m = int(rng.integers(1, 50))
        kk = int(rng.integers(1, 40))
        d = int(rng.integers(1, 16))
        b = int(rng.integers(1, 8))
        test = rng.standard_normal((m, d))
        keys = rng.standard_normal((kk, d))
        md_a, nb_a = numpy_impl.nn_search(test, keys, b)
        md_b, nb_b = numba_impl.nn_search(test, keys, b)
        assert md_a.shape == md_b.shape and nb_a.shape == nb_b.shape
        assert np.allclose(md_a, md_b, rtol=1e-12, atol=1e-12)
        assert np.allclose(nb_a, nb_b, rtol=1e-12, atol=1e-12)


def test_avg_pool_bit_identical(rng):
    for shape in [(1, 1, 1), (2, 1, 5), (3, 5, 1), (4, 7, 9)]:
        t = rng.standard_normal(shape).astype(np.float32)
        assert np.array_equal(numpy_impl.avg_pool3x3(t), numba_impl.avg_pool3x3(t))


def test_gaussian_blur_close(rng):
    for shape in [(1, 1), (1, 9), (9, 1), (5, 5), (33, 17)]:
        g = rng.standard_normal(shape)
        for sigma in (0.0, 1.0, 4.0):
            a = numpy_impl.gaussian_blur(g, sigma)
            b = numba_impl.gaussian_blur(g, sigma)
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_bilinear_resize_identical(rng):
    for src_shape, out_shape in [((2, 2), (8, 8)), ((7, 5), (3, 9)), ((4, 4), (4, 4)), ((1, 1), (5, 5))]:
        g = rng.standard_normal(src_shape)
        a = numpy_impl.bilinear_resize(g, *out_shape)
        b = numba_impl.bilinear_resize(g, *out_shape)
        assert np.allclose(a, b, rtol=1e-14, atol=1e-14)


def test_reflect_indexing_agrees():
    for n in (1, 2, 3, 8):
        for r in (1, 3, 2 * n + 3):
            idx = numpy_impl.reflect_indices(n, r)
            manual = [numba_impl._reflect(i, n) for i in range(-r, n + r)]
            assert idx.tolist() == manual


def test_backend_dispatch_env():
    import os
    import subprocess
    import sys

    code = "import patchmem.kernels as k; print(k.BACKEND)"
    for env_val, expected in (("numpy", "numpy"), ("numba", "numba"), ("auto", "numba")):
        env = dict(os.environ, PATCHMEM_BACKEND=env_val)
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, env=env
        )
        assert out.stdout.strip() == expected, out.stderr
