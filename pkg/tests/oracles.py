"""Independent brute-force references used to derive expected values.

Everything here is deliberately written from the rule statements alone,
with plain Python loops and no reuse of the package's kernels: the greedy
reference recomputes min-distances from scratch each step, the NN
reference scans every pair, the AUC reference counts pairs.
"""

from __future__ import annotations

import math


def sqdist(a, b) -> float:
    acc = 0.0
    for x, y in zip(a, b):
        d = float(x) - float(y)
        acc += d * d
    return acc


def brute_greedy(vectors, k: int, start: int = 0) -> list[int]:
    """Greedy minimax selection: start point, then repeatedly the unselected
    point with the largest min distance to the selected set, ties to the
    lowest index. Distances recomputed in full every step."""
    n = len(vectors)
    k = min(k, n)
    selected = [start]
    while len(selected) < k:
        best_idx = -1
        best_val = -1.0
        for i in range(n):
            if i in selected:
                continue
            mind = min(sqdist(vectors[i], vectors[j]) for j in selected)
            if mind > best_val:
                best_val = mind
                best_idx = i
        selected.append(best_idx)
    return selected


def brute_nn(test_vectors, keys) -> list[float]:
    """Per test vector, the exact nearest-neighbor Euclidean distance."""
    out = []
    for t in test_vectors:
        out.append(math.sqrt(min(sqdist(t, k) for k in keys)))
    return out


def brute_knn(test_vectors, keys, b: int) -> list[list[float]]:
    """Per test vector, the sorted distances to its b nearest keys."""
    out = []
    for t in test_vectors:
        ds = sorted(math.sqrt(sqdist(t, k)) for k in keys)
        out.append(ds[: min(b, len(ds))])
    return out


def extent_formula(s: float) -> float:
    """1 - 2/(1 + exp(s)) evaluated overflow-safely (exact for small s,
    the algebraically identical exp(-s) form for large s)."""
    if s < 700.0:
        return 1.0 - 2.0 / (1.0 + math.exp(s))
    e = math.exp(-s)
    return 1.0 - 2.0 * e / (1.0 + e)


def brute_extent(key, members) -> float:
    """Largest squared key-to-member distance pushed through the squashing."""
    s = max(sqdist(m, key) for m in members)
    return extent_formula(s)


def pairwise_auc(scores, labels) -> float:
    """Mann-Whitney AUC by explicit pair counting, half credit for ties."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    if not pos or not neg:
        raise ValueError("need both classes")
    credit = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                credit += 1.0
            elif p == n:
                credit += 0.5
    return credit / (len(pos) * len(neg))
