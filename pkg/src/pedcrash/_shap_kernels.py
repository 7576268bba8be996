"""Numba kernels for tree Shapley values and cover-weighted coalition values.

Trees arrive packed (see ``models.ensemble.pack_trees``): concatenated node
arrays with global child indices and one root index per tree. A node is a
leaf when ``feature < 0``; rows with ``x[f] <= threshold`` go left.
"""
import numpy as np
from numba import njit, prange

# The recursive kernels are compiled per process: loading a recursive
# function from numba's on-disk cache crashes the interpreter.


@njit(nogil=True)
def _extend(pf, pz, po, pw, off, depth, zero, one, fidx):
    pf[off + depth] = fidx
    pz[off + depth] = zero
    po[off + depth] = one
    pw[off + depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[off + i + 1] += one * pw[off + i] * (i + 1) / (depth + 1)
        pw[off + i] = zero * pw[off + i] * (depth - i) / (depth + 1)


@njit(nogil=True)
def _unwind(pf, pz, po, pw, off, depth, idx):
    one = po[off + idx]
    zero = pz[off + idx]
    nxt = pw[off + depth]
    for i in range(depth - 1, -1, -1):
        if one != 0.0:
            tmp = pw[off + i]
            pw[off + i] = nxt * (depth + 1) / ((i + 1) * one)
            nxt = tmp - pw[off + i] * zero * (depth - i) / (depth + 1)
        else:
            pw[off + i] = pw[off + i] * (depth + 1) / (zero * (depth - i))
    for i in range(idx, depth):
        pf[off + i] = pf[off + i + 1]
        pz[off + i] = pz[off + i + 1]
        po[off + i] = po[off + i + 1]


@njit(nogil=True)
def _unwound_sum(pz, po, pw, off, depth, idx):
    one = po[off + idx]
    zero = pz[off + idx]
    nxt = pw[off + depth]
    total = 0.0
    if one != 0.0:
        for i in range(depth - 1, -1, -1):
            tmp = nxt * (depth + 1) / ((i + 1) * one)
            total += tmp
            nxt = pw[off + i] - tmp * zero * (depth - i) / (depth + 1)
    else:
        for i in range(depth - 1, -1, -1):
            total += pw[off + i] / zero * (depth + 1) / (depth - i)
    return total


@njit(nogil=True)
def _recurse(x, feature, threshold, left, right, cover, value, node,
             pf, pz, po, pw, parent_off, depth, zero, one, fidx, phi, scale):
    off = parent_off + depth + 1
    for i in range(depth + 1):
        pf[off + i] = pf[parent_off + i]
        pz[off + i] = pz[parent_off + i]
        po[off + i] = po[parent_off + i]
        pw[off + i] = pw[parent_off + i]
    _extend(pf, pz, po, pw, off, depth, zero, one, fidx)
    f = feature[node]
    if f < 0:
        for i in range(1, depth + 1):
            w = _unwound_sum(pz, po, pw, off, depth, i) * (po[off + i] - pz[off + i]) * scale
            for j in range(value.shape[1]):
                phi[pf[off + i], j] += w * value[node, j]
        return
    if x[f] <= threshold[node]:
        hot = left[node]
        cold = right[node]
    else:
        hot = right[node]
        cold = left[node]
    iz = 1.0
    io = 1.0
    k = 0
    while k <= depth:
        if pf[off + k] == f:
            break
        k += 1
    if k != depth + 1:
        iz = pz[off + k]
        io = po[off + k]
        _unwind(pf, pz, po, pw, off, depth, k)
        depth -= 1
    _recurse(x, feature, threshold, left, right, cover, value, hot,
             pf, pz, po, pw, off, depth + 1, cover[hot] / cover[node] * iz, io, f, phi, scale)
    _recurse(x, feature, threshold, left, right, cover, value, cold,
             pf, pz, po, pw, off, depth + 1, cover[cold] / cover[node] * iz, 0.0, f, phi, scale)


@njit(nogil=True, parallel=True)
def tree_shap_batch(X, feature, threshold, left, right, cover, value, roots, max_depth, scale):
    """Path-dependent Shapley values, shape (n, d, n_out), for ``scale * sum_t tree_t``.

    Instances are independent, so results do not depend on the thread count.
    """
    n, d = X.shape
    n_out = value.shape[1]
    size = (max_depth + 2) * (max_depth + 3) // 2 + max_depth + 3
    out = np.zeros((n, d, n_out))
    for r in prange(n):
        pf = np.full(size, -1, dtype=np.int64)
        pz = np.zeros(size)
        po = np.zeros(size)
        pw = np.zeros(size)
        phi = np.zeros((d, n_out))
        for t in range(roots.shape[0]):
            _recurse(X[r], feature, threshold, left, right, cover, value, roots[t],
                     pf, pz, po, pw, 0, 0, 1.0, 1.0, -1, phi, scale)
        out[r] = phi
    return out


@njit(cache=True, nogil=True)
def cover_expectation(x, present, feature, threshold, left, right, cover, value, roots):
    """Sum over trees of the cover-weighted leaf average given the present features.

    Present features follow ``x`` down the tree; for an absent feature both
    children contribute in proportion to their training cover.
    """
    n_out = value.shape[1]
    acc = np.zeros(n_out)
    stack_node = np.empty(feature.shape[0] + 1, dtype=np.int64)
    stack_w = np.empty(feature.shape[0] + 1)
    for t in range(roots.shape[0]):
        top = 0
        stack_node[0] = roots[t]
        stack_w[0] = 1.0
        top = 1
        while top > 0:
            top -= 1
            node = stack_node[top]
            w = stack_w[top]
            f = feature[node]
            if f < 0:
                for j in range(n_out):
                    acc[j] += w * value[node, j]
            elif present[f]:
                stack_node[top] = left[node] if x[f] <= threshold[node] else right[node]
                stack_w[top] = w
                top += 1
            else:
                stack_node[top] = left[node]
                stack_w[top] = w * cover[left[node]] / cover[node]
                stack_node[top + 1] = right[node]
                stack_w[top + 1] = w * cover[right[node]] / cover[node]
                top += 2
    return acc


@njit(cache=True, nogil=True)
def all_coalition_values(x, mapping, n_players, feature, threshold, left, right, cover, value, roots):
    """Cover-weighted value of every coalition (bitmask over players), shape (2^N, n_out).

    ``mapping[j]`` is the player owning model feature j, or -1 when the
    feature belongs to nobody (always absent).
    """
    n_masks = 1 << n_players
    out = np.empty((n_masks, value.shape[1]))
    present = np.zeros(mapping.shape[0], dtype=np.bool_)
    for m in range(n_masks):
        for j in range(mapping.shape[0]):
            p = mapping[j]
            present[j] = p >= 0 and (m >> p) & 1 == 1
        out[m] = cover_expectation(x, present, feature, threshold, left, right, cover, value, roots)
    return out
