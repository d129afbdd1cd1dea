"""Fallback implementations of the hot kernels.

Same contracts as the compiled extension in _kernels.pyx; harmkit.kernels
picks whichever is importable. Keep both sides behaviorally identical —
the n-gram hash must produce bit-identical indices in both.
"""

from __future__ import annotations

import numpy as np

_FNV_BASIS = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_SEED_MIX = 0x9E3779B97F4A7C15
_MASK = 0xFFFFFFFFFFFFFFFF


def assign_nearest(points: np.ndarray, centroids: np.ndarray):
    """For each point, index of the nearest centroid (squared Euclidean).

    Ties resolve to the lowest centroid index. Returns (labels, sq_dists).
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    centroids = np.ascontiguousarray(centroids, dtype=np.float64)
    n = points.shape[0]
    k = centroids.shape[0]
    dists = np.empty((k, n), dtype=np.float64)
    for j in range(k):
        diff = points - centroids[j]
        dists[j] = np.einsum("ij,ij->i", diff, diff)
    labels = np.argmin(dists, axis=0).astype(np.int64)
    return labels, dists[labels, np.arange(n)]


def ngram_hash_counts(text: str, orders: tuple, dim: int, seed: int):
    """Counts of hashed character n-grams of the given orders.

    Hash is FNV-1a over the code points (4 bytes little-endian each), mixed
    with the seed, reduced mod dim. Returns (sorted indices, counts).
    """
    counts: dict[int, int] = {}
    n = len(text)
    cps = [ord(ch) for ch in text]
    seed_mixed = (_FNV_BASIS ^ ((seed * _SEED_MIX) & _MASK)) & _MASK
    for order in orders:
        if order <= 0 or order > n:
            continue
        for start in range(n - order + 1):
            h = seed_mixed
            for i in range(start, start + order):
                cp = cps[i]
                for shift in (0, 8, 16, 24):
                    h ^= (cp >> shift) & 0xFF
                    h = (h * _FNV_PRIME) & _MASK
            idx = h % dim
            counts[idx] = counts.get(idx, 0) + 1
    if not counts:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[int(i)] for i in indices], dtype=np.float64)
    return indices, values
