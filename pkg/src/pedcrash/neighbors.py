"""Exact brute-force nearest neighbours with deterministic tie-breaking.

Distances are exact squared Euclidean sums (no expansion tricks) so equal
distances compare equal; ties always go to the lower reference index.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _knn(Q, R, k, exclude_self):
    nq = Q.shape[0]
    nr = R.shape[0]
    d = Q.shape[1]
    out_idx = np.full((nq, k), -1, dtype=np.int64)
    out_dist = np.full((nq, k), np.inf)
    for i in range(nq):
        filled = 0
        for j in range(nr):
            if exclude_self and i == j:
                continue
            s = 0.0
            for f in range(d):
                t = Q[i, f] - R[j, f]
                s += t * t
            if filled < k:
                pos = filled
                filled += 1
            elif s < out_dist[i, k - 1]:
                pos = k - 1
            else:
                continue
            # j is larger than every stored index, so equal distances stay ahead of it
            while pos > 0 and out_dist[i, pos - 1] > s:
                out_dist[i, pos] = out_dist[i, pos - 1]
                out_idx[i, pos] = out_idx[i, pos - 1]
                pos -= 1
            out_dist[i, pos] = s
            out_idx[i, pos] = j
    return out_idx, out_dist


def kneighbors(query, reference, k, exclude_self=False):
    """Indices and squared distances of the k nearest reference rows for every query row.

    With ``exclude_self`` the query is the reference set and row i never
    counts as its own neighbour (exact duplicates at other indices still do).
    """
    Q = np.ascontiguousarray(query, dtype=float)
    R = np.ascontiguousarray(reference, dtype=float)
    if Q.ndim != 2 or R.ndim != 2 or Q.shape[1] != R.shape[1]:
        raise ValueError("query and reference must be 2-D with equal column counts")
    available = R.shape[0] - (1 if exclude_self else 0)
    k = int(min(k, available))
    if k < 1:
        raise ValueError("not enough reference rows for a neighbour query")
    return _knn(Q, R, k, bool(exclude_self))


def zscore_stats(X):
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std
