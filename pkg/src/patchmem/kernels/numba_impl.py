"""Numba-compiled twins of the numpy kernels.

Semantics match ``numpy_impl`` function for function: identical tie rules
and identical per-element accumulation order, so the two backends agree to
float rounding (bit-exactly for the pooling/blur tap loops).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def greedy_select(vectors: np.ndarray, k: int, start: int) -> np.ndarray:
    n, d = vectors.shape
    selected = np.empty(k, dtype=np.int64)
    selected[0] = start
    min_d = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(d):
            diff = vectors[i, j] - vectors[start, j]
            acc += diff * diff
        min_d[i] = acc
    min_d[start] = -1.0
    for step in range(1, k):
        nxt = 0
        best = min_d[0]
        for i in range(1, n):
            if min_d[i] > best:
                best = min_d[i]
                nxt = i
        selected[step] = nxt
        for i in range(n):
            acc = 0.0
            for j in range(d):
                diff = vectors[i, j] - vectors[nxt, j]
                acc += diff * diff
            if acc < min_d[i]:
                min_d[i] = acc
        min_d[nxt] = -1.0
    return selected


@njit(cache=True)
def assign_nearest(vectors: np.ndarray, keys: np.ndarray) -> np.ndarray:
    n, d = vectors.shape
    kk = keys.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = np.inf
        arg = 0
        for j in range(kk):
            acc = 0.0
            for c in range(d):
                diff = vectors[i, c] - keys[j, c]
                acc += diff * diff
            if acc < best:
                best = acc
                arg = j
        out[i] = arg
    return out


@njit(cache=True)
def nn_search(test: np.ndarray, keys: np.ndarray, b: int) -> tuple[np.ndarray, np.ndarray]:
    m, d = test.shape
    kk = keys.shape[0]
    bb = min(b, kk)
    min_dist = np.empty(m)
    neigh = np.empty((m, bb))
    buf = np.empty(bb)
    for i in range(m):
        count = 0
        for j in range(kk):
            acc = 0.0
            for c in range(d):
                diff = test[i, c] - keys[j, c]
                acc += diff * diff
            # insertion into the running sorted buffer of the bb smallest
            if count < bb:
                pos = count
                while pos > 0 and buf[pos - 1] > acc:
                    buf[pos] = buf[pos - 1]
                    pos -= 1
                buf[pos] = acc
                count += 1
            elif acc < buf[bb - 1]:
                pos = bb - 1
                while pos > 0 and buf[pos - 1] > acc:
                    buf[pos] = buf[pos - 1]
                    pos -= 1
                buf[pos] = acc
        for j in range(bb):
            neigh[i, j] = np.sqrt(buf[j])
        min_dist[i] = neigh[i, 0]
    return min_dist, neigh


@njit(cache=True)
def _reflect(i: int, n: int) -> int:
    if n == 1:
        return 0
    period = 2 * n - 2
    i = i % period
    if i < 0:
        i += period
    if i >= n:
        i = period - i
    return i


@njit(cache=True)
def avg_pool3x3(t: np.ndarray) -> np.ndarray:
    c, h, w = t.shape
    out = np.empty((c, h, w), dtype=np.float32)
    for ch in range(c):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for dr in range(-1, 2):
                    ri = _reflect(i + dr, h)
                    for dc in range(-1, 2):
                        cj = _reflect(j + dc, w)
                        acc += float(t[ch, ri, cj])
                out[ch, i, j] = np.float32(acc / 9.0)
    return out


@njit(cache=True)
def gaussian_blur(grid: np.ndarray, sigma: float) -> np.ndarray:
    h, w = grid.shape
    if sigma <= 0.0:
        out = np.empty((h, w))
        for i in range(h):
            for j in range(w):
                out[i, j] = grid[i, j]
        return out
    r = int(np.ceil(4.0 * sigma))
    taps = 2 * r + 1
    k = np.empty(taps)
    total = 0.0
    for t in range(taps):
        x = float(t - r)
        k[t] = np.exp(-(x * x) / (2.0 * sigma * sigma))
        total += k[t]
    for t in range(taps):
        k[t] /= total
    tmp = np.zeros((h, w))
    for t in range(taps):
        off = t - r
        for i in range(h):
            for j in range(w):
                tmp[i, j] += k[t] * grid[i, _reflect(j + off, w)]
    out = np.zeros((h, w))
    for t in range(taps):
        off = t - r
        for i in range(h):
            for j in range(w):
                out[i, j] += k[t] * tmp[_reflect(i + off, h), j]
    return out


@njit(cache=True)
def bilinear_resize(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = src.shape
    out = np.empty((out_h, out_w))
    if h == out_h and w == out_w:
        for i in range(h):
            for j in range(w):
                out[i, j] = src[i, j]
        return out
    for i in range(out_h):
        y = (i + 0.5) * (h / out_h) - 0.5
        if y < 0.0:
            y = 0.0
        if y > h - 1.0:
            y = h - 1.0
        y0 = int(np.floor(y))
        y1 = min(y0 + 1, h - 1)
        fy = y - y0
        for j in range(out_w):
            x = (j + 0.5) * (w / out_w) - 0.5
            if x < 0.0:
                x = 0.0
            if x > w - 1.0:
                x = w - 1.0
            x0 = int(np.floor(x))
            x1 = min(x0 + 1, w - 1)
            fx = x - x0
            a = src[y0, x0]
            b = src[y0, x1]
            c = src[y1, x0]
            d = src[y1, x1]
            top = a + (b - a) * fx
            bot = c + (d - c) * fx
            out[i, j] = top + (bot - top) * fy
    return out
