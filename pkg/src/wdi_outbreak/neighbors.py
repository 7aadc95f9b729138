"""Exact k-nearest-neighbour search under euclidean distance.

Squared distances are first estimated with the BLAS expansion
``|a|^2 + |b|^2 - 2 a.b`` and then recomputed exactly (direct sum of squared
differences) for every candidate whose estimate is within rounding distance
of the k-th smallest. Ties on the exact value go to the lowest index, so the
result is identical to a brute-force all-pairs scan.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 512


def exact_sqdist(a: np.ndarray, B: np.ndarray) -> np.ndarray:
    diff = B - a
    return np.einsum("ij,ij->i", diff, diff)


def kneighbors(
    Q: np.ndarray,
    R: np.ndarray,
    k: int,
    exclude: np.ndarray | None = None,
) -> np.ndarray:
    """Indices (into ``R``) of the ``k`` nearest reference rows for each query.

    ``exclude[i]``, when >= 0, is a reference index barred for query ``i``
    (used to skip the query itself). Returns shape ``(len(Q), k)`` ordered by
    (distance, index).
    """
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    nq, nr = len(Q), len(R)
    avail = nr - (1 if exclude is not None else 0)
    if k > avail:
        raise ValueError(f"asked for {k} neighbours among {avail} candidates")
    out = np.empty((nq, k), dtype=np.int64)
    if nq == 0:
        return out
    rn = np.einsum("ij,ij->i", R, R)
    for start in range(0, nq, _CHUNK):
        q = Q[start : start + _CHUNK]
        qn = np.einsum("ij,ij->i", q, q)
        approx = qn[:, None] + rn[None, :] - 2.0 * (q @ R.T)
        tol = 1e-9 * (qn[:, None] + rn[None, :]) + 1e-300
        if exclude is not None:
            ex = exclude[start : start + _CHUNK]
            rows = np.flatnonzero(ex >= 0)
            approx[rows, ex[rows]] = np.inf
        for i in range(len(q)):
            out[start + i] = _refine(q[i], R, approx[i], tol[i], k)
    return out


def _refine(query, R, approx, tol, k):
    if k < len(approx):
        kth = np.partition(approx, k - 1)[k - 1]
    else:
        kth = approx[np.isfinite(approx)].max()
    cand = np.flatnonzero(approx <= kth + 2 * tol)
    exact = exact_sqdist(query, R[cand])
    order = np.lexsort((cand, exact))
    return cand[order[:k]]


def brute_kneighbors(Q, R, k, exclude=None):
    """All-pairs reference implementation of :func:`kneighbors`."""
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    out = np.empty((len(Q), k), dtype=np.int64)
    for i, q in enumerate(Q):
        d = exact_sqdist(q, R)
        if exclude is not None and exclude[i] >= 0:
            d[exclude[i]] = np.inf
        out[i] = np.lexsort((np.arange(len(R)), d))[:k]
    return out
