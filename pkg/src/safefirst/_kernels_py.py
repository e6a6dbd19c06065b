"""NumPy fallbacks for the compiled kernels in ``_speedups``.

Same contracts as the Cython versions; see ``_kernels`` for backend
selection. Distances here use the expanded quadratic form, so orderings can
differ from the compiled kernel in the last ulp for near-tied neighbours.
"""

from __future__ import annotations

import numpy as np
from scipy import special


def normal_cdf(z: np.ndarray) -> np.ndarray:
    """Standard normal CDF, elementwise (erfc-based, abs error < 1e-12)."""
    return special.ndtr(np.asarray(z, dtype=np.float64))


def rowwise_argmax_tie(scores: np.ndarray, tie_eps: float):
    """Per-row argmax with smallest-index tie resolution.

    Returns ``(winners, tie_flags)``. A row is tied when its second-best
    score exceeds ``best - tie_eps``; the winner is then the first column
    above that threshold.
    """
    s = np.ascontiguousarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[1] < 2:
        raise ValueError(f"scores must be (n, m>=2), got shape {s.shape}")
    best = s.max(axis=1)
    second = np.partition(s, -2, axis=1)[:, -2]
    thr = best - tie_eps
    tie_flags = second > thr
    winners = s.argmax(axis=1)
    if tie_flags.any():
        first_within = (s > thr[:, None]).argmax(axis=1)
        winners = np.where(tie_flags, first_within, winners)
    return winners.astype(np.int64), tie_flags


def knn_mean(train: np.ndarray, targets: np.ndarray, query: np.ndarray,
             k: int, block: int = 256) -> np.ndarray:
    """Average the k nearest rows' targets for every query row.

    Euclidean distance on the given coordinates; ties in distance are broken
    by training-row order. ``targets`` is (n, m); the result is (q, m).
    """
    train = np.ascontiguousarray(train, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    query = np.ascontiguousarray(query, dtype=np.float64)
    n = train.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    out = np.empty((query.shape[0], targets.shape[1]), dtype=np.float64)
    train_sq = np.einsum("ij,ij->i", train, train)
    for start in range(0, query.shape[0], block):
        qb = query[start:start + block]
        d = np.einsum("ij,ij->i", qb, qb)[:, None] + train_sq[None, :]
        d -= 2.0 * (qb @ train.T)
        idx = np.argsort(d, axis=1, kind="stable")[:, :k]
        out[start:start + block] = targets[idx].mean(axis=1)
    return out
