# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: normal CDF, row-wise argmax with tie detection,
and k-nearest-neighbour target averaging.

``safefirst._kernels`` selects these at import and falls back to the NumPy
implementations in ``_kernels_py`` when the extension is not built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, erfc

cnp.import_array()

cdef double INV_SQRT2 = 0.7071067811865475244008443621


def normal_cdf(object z):
    """Standard normal CDF, elementwise (erfc-based, abs error < 1e-12)."""
    arr = np.asarray(z, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.ascontiguousarray(arr).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(flat.shape[0], dtype=np.float64)
    cdef Py_ssize_t i
    for i in range(flat.shape[0]):
        out[i] = 0.5 * erfc(-flat[i] * INV_SQRT2)
    return out.reshape(arr.shape)


def rowwise_argmax_tie(object scores, double tie_eps):
    """Per-row argmax with smallest-index tie resolution.

    Returns ``(winners, tie_flags)``. A row is tied when its second-best
    score exceeds ``best - tie_eps``; the winner is then the first column
    above that threshold.
    """
    cdef double[:, ::1] s = np.ascontiguousarray(scores, dtype=np.float64)
    if s.shape[1] < 2:
        raise ValueError(f"scores must be (n, m>=2), got {s.shape[1]} columns")
    cdef Py_ssize_t n = s.shape[0], m = s.shape[1]
    winners_arr = np.empty(n, dtype=np.int64)
    flags_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.int64_t[::1] winners = winners_arr
    cdef cnp.uint8_t[::1] flags = flags_arr
    cdef Py_ssize_t i, j, best_j
    cdef double v, best, second, thr
    for i in range(n):
        best = s[i, 0]
        second = -INFINITY
        best_j = 0
        for j in range(1, m):
            v = s[i, j]
            if v > best:
                second = best
                best = v
                best_j = j
            elif v > second:
                second = v
        thr = best - tie_eps
        if second > thr:
            flags[i] = 1
            for j in range(m):
                if s[i, j] > thr:
                    best_j = j
                    break
        winners[i] = best_j
    return winners_arr, flags_arr.view(np.bool_)


def knn_mean(object train, object targets, object query, Py_ssize_t k):
    """Average the k nearest rows' targets for every query row.

    Euclidean distance on the given coordinates; ties in distance are broken
    by training-row order. ``targets`` is (n, m); the result is (q, m).
    """
    cdef double[:, ::1] tr = np.ascontiguousarray(train, dtype=np.float64)
    cdef double[:, ::1] tg = np.ascontiguousarray(targets, dtype=np.float64)
    cdef double[:, ::1] qu = np.ascontiguousarray(query, dtype=np.float64)
    cdef Py_ssize_t n = tr.shape[0], p = tr.shape[1]
    cdef Py_ssize_t q = qu.shape[0], m = tg.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    if qu.shape[1] != p or tg.shape[0] != n:
        raise ValueError("train, targets and query shapes are inconsistent")

    out_arr = np.empty((q, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    best_d_arr = np.empty(k, dtype=np.float64)
    best_i_arr = np.empty(k, dtype=np.intp)
    cdef double[::1] best_d = best_d_arr
    cdef Py_ssize_t[::1] best_i = best_i_arr
    cdef Py_ssize_t i, r, c, pos, filled
    cdef double d, diff, worst, acc

    for i in range(q):
        filled = 0
        worst = INFINITY
        for r in range(n):
            d = 0.0
            for c in range(p):
                diff = qu[i, c] - tr[r, c]
                d += diff * diff
            if filled < k:
                pos = filled
                while pos > 0 and best_d[pos - 1] > d:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos -= 1
                best_d[pos] = d
                best_i[pos] = r
                filled += 1
                worst = best_d[filled - 1] if filled == k else INFINITY
            elif d < worst:
                pos = k - 1
                while pos > 0 and best_d[pos - 1] > d:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos -= 1
                best_d[pos] = d
                best_i[pos] = r
                worst = best_d[k - 1]
        for c in range(m):
            acc = 0.0
            for pos in range(k):
                acc += tg[best_i[pos], c]
            out[i, c] = acc / k
    return out_arr
