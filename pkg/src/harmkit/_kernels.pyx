# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: nearest-centroid assignment and n-gram hashing.

Contracts mirror _kernels_py.py exactly; harmkit.kernels selects this module
when it compiled successfully.
"""

import numpy as np

cdef extern from *:
    """
    static const unsigned long long FNV_BASIS = 0xCBF29CE484222325ULL;
    static const unsigned long long FNV_PRIME = 0x100000001B3ULL;
    static const unsigned long long SEED_MIX  = 0x9E3779B97F4A7C15ULL;
    """
    const unsigned long long FNV_BASIS
    const unsigned long long FNV_PRIME
    const unsigned long long SEED_MIX


def assign_nearest(points, centroids):
    """For each point, index of the nearest centroid (squared Euclidean).

    Ties resolve to the lowest centroid index. Returns (labels, sq_dists).
    """
    cdef double[:, ::1] x = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(centroids, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], k = c.shape[0], d = x.shape[1]
    labels_arr = np.empty(n, dtype=np.int64)
    dists_arr = np.empty(n, dtype=np.float64)
    cdef long long[::1] labels = labels_arr
    cdef double[::1] dists = dists_arr
    cdef Py_ssize_t i, j, m
    cdef double best, acc, diff
    cdef Py_ssize_t best_j
    for i in range(n):
        best = -1.0
        best_j = 0
        for j in range(k):
            acc = 0.0
            for m in range(d):
                diff = x[i, m] - c[j, m]
                acc += diff * diff
            if best < 0.0 or acc < best:
                best = acc
                best_j = j
        labels[i] = best_j
        dists[i] = best
    return labels_arr, dists_arr


def ngram_hash_counts(text, orders, long long dim, long long seed):
    """Counts of hashed character n-grams of the given orders.

    Hash is FNV-1a over the code points (4 bytes little-endian each), mixed
    with the seed, reduced mod dim. Returns (sorted indices, counts).
    """
    cdef Py_ssize_t n = len(text)
    cps_arr = np.array([ord(ch) for ch in text], dtype=np.uint32) \
        if n else np.empty(0, dtype=np.uint32)
    cdef unsigned int[::1] cps = cps_arr
    cdef unsigned long long seed_mixed = FNV_BASIS ^ (<unsigned long long> seed * SEED_MIX)
    cdef unsigned long long h, udim = <unsigned long long> dim
    cdef Py_ssize_t start, i, order_i
    cdef int order, shift
    cdef unsigned int cp
    counts = {}
    for order_i in range(len(orders)):
        order = orders[order_i]
        if order <= 0 or order > n:
            continue
        for start in range(n - order + 1):
            h = seed_mixed
            for i in range(start, start + order):
                cp = cps[i]
                for shift in range(0, 32, 8):
                    h ^= (cp >> shift) & 0xFFU
                    h *= FNV_PRIME
            counts[h % udim] = counts.get(h % udim, 0) + 1
    if not counts:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[int(i)] for i in indices], dtype=np.float64)
    return indices, values
