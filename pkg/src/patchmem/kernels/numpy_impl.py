"""Pure-numpy implementations of the hot kernels.

These are the fallback path when numba is unavailable or disabled via
PATCHMEM_BACKEND=numpy. Each function mirrors the numba twin in
``numba_impl`` exactly: same signatures, same tie rules, same accumulation
order wherever ordering is observable (argmax ties, pooling taps).
"""

from __future__ import annotations

import numpy as np

# Temp buffers in the exhaustive search are chunked so the (m, K, d)
# broadcast never exceeds ~64 MB.
_CHUNK_ELEMS = 8_000_000


def greedy_select(vectors: np.ndarray, k: int, start: int) -> np.ndarray:
    """Minimax facility-location greedy selection.

    vectors: (n, d) float64. Picks ``start`` first, then repeatedly the
    point maximizing its min squared distance to the selected set. Ties
    resolve to the lowest index (argmax first occurrence). Returns the k
    selected indices in selection order.
    """
    n = vectors.shape[0]
    selected = np.empty(k, dtype=np.int64)
    selected[0] = start
    # min squared distance to the selected set; selected entries are
    # parked at -1 so they can never win the argmax.
    min_d = ((vectors - vectors[start]) ** 2).sum(axis=1)
    min_d[start] = -1.0
    for step in range(1, k):
        nxt = int(np.argmax(min_d))
        selected[step] = nxt
        d = ((vectors - vectors[nxt]) ** 2).sum(axis=1)
        np.minimum(min_d, d, out=min_d)
        min_d[nxt] = -1.0
    return selected


def assign_nearest(vectors: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Index of the nearest key for every vector; ties -> lowest key position."""
    out = np.empty(vectors.shape[0], dtype=np.int64)
    best = np.full(vectors.shape[0], np.inf)
    for j in range(keys.shape[0]):
        d = ((vectors - keys[j]) ** 2).sum(axis=1)
        better = d < best
        out[better] = j
        best[better] = d[better]
    return out


def nn_search(test: np.ndarray, keys: np.ndarray, b: int) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive Euclidean search of ``test`` (m, d) against ``keys`` (K, d).

    Returns (min_dist (m,), neigh (m, min(b, K))) where neigh rows are the
    sorted distances to the b nearest keys. Distances are true (square
    rooted) Euclidean distances in float64.
    """
    m, d = test.shape
    kk = keys.shape[0]
    bb = min(b, kk)
    min_dist = np.empty(m)
    neigh = np.empty((m, bb))
    chunk = max(1, _CHUNK_ELEMS // max(1, kk * d))
    for lo in range(0, m, chunk):
        hi = min(m, lo + chunk)
        d2 = ((test[lo:hi, None, :] - keys[None, :, :]) ** 2).sum(axis=2)
        part = np.sort(d2, axis=1)[:, :bb]
        neigh[lo:hi] = np.sqrt(part)
        min_dist[lo:hi] = neigh[lo:hi, 0]
    return min_dist, neigh


def avg_pool3x3(t: np.ndarray) -> np.ndarray:
    """3x3 average pooling, stride 1, reflect padding, per channel.

    t: (C, H, W) float32. Accumulates in float64, returns float32.
    """
    c, h, w = t.shape
    ridx = reflect_indices(h, 1)
    cidx = reflect_indices(w, 1)
    padded = t.astype(np.float64)[:, ridx][:, :, cidx]
    acc = np.zeros((c, h, w))
    for dr in range(3):
        for dc in range(3):
            acc += padded[:, dr : dr + h, dc : dc + w]
    return (acc / 9.0).astype(np.float32)


def reflect_indices(n: int, r: int) -> np.ndarray:
    """Source indices for reflect padding of width r on an axis of length n.

    Mirrors about the edge samples without duplicating them (period 2n-2),
    repeating the reflection for r >= n. n == 1 degenerates to index 0.
    """
    idx = np.arange(-r, n + r, dtype=np.int64)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n - 2
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps truncated at radius ceil(4*sigma)."""
    r = int(np.ceil(4.0 * sigma))
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(grid: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflect padding; sigma == 0 is identity."""
    if sigma <= 0.0:
        return grid.astype(np.float64).copy()
    k = gaussian_kernel(sigma)
    r = (k.shape[0] - 1) // 2
    h, w = grid.shape
    # horizontal pass
    cidx = reflect_indices(w, r)
    padded = grid.astype(np.float64)[:, cidx]
    tmp = np.zeros((h, w))
    for t in range(k.shape[0]):
        tmp += k[t] * padded[:, t : t + w]
    # vertical pass
    ridx = reflect_indices(h, r)
    padded = tmp[ridx, :]
    out = np.zeros((h, w))
    for t in range(k.shape[0]):
        out += k[t] * padded[t : t + h, :]
    return out


def bilinear_resize(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with half-pixel-aligned sample centers."""
    h, w = src.shape
    src = src.astype(np.float64)
    if h == out_h and w == out_w:
        return src.copy()
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    a = src[np.ix_(y0, x0)]
    b = src[np.ix_(y0, x1)]
    c = src[np.ix_(y1, x0)]
    d = src[np.ix_(y1, x1)]
    top = a + (b - a) * fx
    bot = c + (d - c) * fx
    return top + (bot - top) * fy
