"""Compiled tree kernels: CART growth and ensemble traversal.

Trees are flat arrays. ``feature[i] < 0`` marks a leaf; otherwise rows with
``x[feature[i]] <= threshold[i]`` go to ``left[i]``. Node 0 is the root.
"""
import numpy as np
from numba import njit

TASK_GINI = 0
TASK_SQUARED = 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True)
def _next_u64(state):
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _uniform(state):
    return float(_next_u64(state) >> np.uint64(11)) * _INV53


@njit(cache=True, nogil=True)
def _randbelow(state, n):
    k = int(_uniform(state) * n)
    return k if k < n else n - 1


@njit(cache=True, nogil=True)
def _better(score, f, thr, best, best_f, best_thr):
    tol = 1e-12 * max(1.0, abs(best))
    if score > best + tol:
        return True
    if score >= best - tol:
        if f < best_f or (f == best_f and thr < best_thr):
            return True
    return False


@njit(cache=True, nogil=True)
def grow_tree(X, rows, labels, targets, weights, n_out, task, max_depth, min_split,
              min_leaf, mtry, random_split, seed, presorted):
    """Grow one tree on ``X[rows]`` (rows may repeat, e.g. for bootstrap samples).

    ``labels``/``targets``/``weights`` are indexed by row id, like ``X``.
    ``presorted`` is either an empty (0, 0) array or, per feature, the argsort
    of that column over all rows of X; large nodes then scan it in order
    instead of sorting their own values.
    Returns (feature, threshold, left, right, cover, value, n_nodes).
    """
    n_all, n_features = X.shape
    has_sorted = presorted.shape[0] == n_features and presorted.shape[1] == n_all

    mult = np.zeros(n_all, dtype=np.int64)
    for p in range(rows.shape[0]):
        mult[rows[p]] += 1
    n_unique = 0
    for r in range(n_all):
        if mult[r] > 0:
            n_unique += 1
    idx = np.empty(n_unique, dtype=np.int64)
    q = 0
    for r in range(n_all):
        if mult[r] > 0:
            idx[q] = r
            q += 1
    node_of = np.full(n_all, -1, dtype=np.int64)
    for p in range(n_unique):
        node_of[idx[p]] = 0
    wm = np.empty(n_all)
    for r in range(n_all):
        wm[r] = weights[r] * mult[r]

    cap = 2 * n_unique + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    cover = np.zeros(cap)
    value = np.zeros((cap, n_out))

    tmp = np.empty(n_unique, dtype=np.int64)
    vals = np.empty(n_unique)
    seq = np.empty(n_unique, dtype=np.int64)
    order_feat = np.arange(n_features)
    cls_l = np.zeros(n_out)
    cls_tot = np.zeros(n_out)
    state = np.zeros(1, dtype=np.uint64)
    state[0] = np.uint64(seed)

    stack_node = np.empty(cap, dtype=np.int64)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = n_unique
    stack_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        start = stack_start[sp]
        end = stack_end[sp]
        depth = stack_depth[sp]
        mu = end - start

        # node statistics
        m = 0
        w_tot = 0.0
        s_tot = 0.0
        ss_tot = 0.0
        for k in range(n_out):
            cls_tot[k] = 0.0
        for p in range(start, end):
            r = idx[p]
            m += mult[r]
            w = wm[r]
            w_tot += w
            if task == TASK_GINI:
                cls_tot[labels[r]] += w
            else:
                s_tot += w * targets[r]
                ss_tot += w * targets[r] * targets[r]
        cover[node] = m
        pure = False
        if task == TASK_GINI:
            nonzero = 0
            for k in range(n_out):
                value[node, k] = cls_tot[k] / w_tot if w_tot > 0 else 1.0 / n_out
                if cls_tot[k] > 0:
                    nonzero += 1
            pure = nonzero <= 1
        else:
            mean = s_tot / w_tot if w_tot > 0 else 0.0
            for k in range(n_out):
                value[node, k] = mean
            pure = ss_tot - s_tot * mean <= 1e-14 * max(1.0, ss_tot)

        if pure or depth >= max_depth or m < min_split or m < 2 * min_leaf:
            continue

        # feature visiting order
        for j in range(n_features):
            order_feat[j] = j
        if mtry < n_features:
            for j in range(n_features - 1, 0, -1):
                q = _randbelow(state, j + 1)
                t = order_feat[j]
                order_feat[j] = order_feat[q]
                order_feat[q] = t

        use_scan = has_sorted and mu * (np.log2(mu + 1.0) + 1.0) > 2.0 * n_all
        best = -np.inf
        best_f = n_features
        best_thr = np.inf
        visited = 0
        for jj in range(n_features):
            if visited >= mtry:
                break
            f = order_feat[jj]
            lo = np.inf
            hi = -np.inf
            for p in range(start, end):
                v = X[idx[p], f]
                vals[p - start] = v
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
            if not hi > lo:
                continue
            visited += 1
            if random_split:
                thr = lo + _uniform(state) * (hi - lo)
                if thr >= hi:
                    thr = lo
                n_l = 0
                w_l = 0.0
                s_l = 0.0
                for k in range(n_out):
                    cls_l[k] = 0.0
                for p in range(start, end):
                    if vals[p - start] <= thr:
                        r = idx[p]
                        n_l += mult[r]
                        w_l += wm[r]
                        if task == TASK_GINI:
                            cls_l[labels[r]] += wm[r]
                        else:
                            s_l += wm[r] * targets[r]
                if n_l < min_leaf or m - n_l < min_leaf:
                    continue
                w_r = w_tot - w_l
                if w_l <= 0 or w_r <= 0:
                    continue
                if task == TASK_GINI:
                    a = 0.0
                    b = 0.0
                    for k in range(n_out):
                        a += cls_l[k] * cls_l[k]
                        d = cls_tot[k] - cls_l[k]
                        b += d * d
                    score = a / w_l + b / w_r
                else:
                    score = s_l * s_l / w_l + (s_tot - s_l) * (s_tot - s_l) / w_r
                if _better(score, f, thr, best, best_f, best_thr):
                    best = score
                    best_f = f
                    best_thr = thr
                continue

            # exhaustive: node rows in ascending order of feature f
            if use_scan:
                q = 0
                for p in range(n_all):
                    r = presorted[f, p]
                    if node_of[r] == node:
                        seq[q] = r
                        q += 1
            else:
                order = np.argsort(vals[:mu], kind="mergesort")
                for p in range(mu):
                    seq[p] = idx[start + order[p]]
            n_l = 0
            w_l = 0.0
            s_l = 0.0
            for k in range(n_out):
                cls_l[k] = 0.0
            prev = X[seq[0], f]
            for p in range(mu):
                r = seq[p]
                v = X[r, f]
                if v > prev and n_l >= min_leaf and m - n_l >= min_leaf:
                    w_r = w_tot - w_l
                    if w_l > 0 and w_r > 0:
                        if task == TASK_GINI:
                            a = 0.0
                            b = 0.0
                            for k in range(n_out):
                                a += cls_l[k] * cls_l[k]
                                d = cls_tot[k] - cls_l[k]
                                b += d * d
                            score = a / w_l + b / w_r
                        else:
                            score = s_l * s_l / w_l + (s_tot - s_l) * (s_tot - s_l) / w_r
                        thr = 0.5 * (prev + v)
                        if thr >= v:
                            thr = prev
                        if _better(score, f, thr, best, best_f, best_thr):
                            best = score
                            best_f = f
                            best_thr = thr
                n_l += mult[r]
                w_l += wm[r]
                if task == TASK_GINI:
                    cls_l[labels[r]] += wm[r]
                else:
                    s_l += wm[r] * targets[r]
                prev = v

        if best_f == n_features:
            continue

        # stable partition of idx[start:end]
        lc = n_nodes
        rc = n_nodes + 1
        n_l = 0
        for p in range(start, end):
            if X[idx[p], best_f] <= best_thr:
                tmp[n_l] = idx[p]
                node_of[idx[p]] = lc
                n_l += 1
        n_r = 0
        for p in range(start, end):
            if not X[idx[p], best_f] <= best_thr:
                tmp[n_l + n_r] = idx[p]
                node_of[idx[p]] = rc
                n_r += 1
        for p in range(mu):
            idx[start + p] = tmp[p]

        feature[node] = best_f
        threshold[node] = best_thr
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        # right pushed first so the left subtree is grown first
        stack_node[sp] = rc
        stack_start[sp] = start + n_l
        stack_end[sp] = end
        stack_depth[sp] = depth + 1
        sp += 1
        stack_node[sp] = lc
        stack_start[sp] = start
        stack_end[sp] = start + n_l
        stack_depth[sp] = depth + 1
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), cover[:n_nodes].copy(), value[:n_nodes].copy(), n_nodes)


@njit(cache=True, nogil=True)
def apply_tree(X, feature, threshold, left, right):
    """Leaf index reached by every row of X."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True, nogil=True)
def sum_trees(X, feature, threshold, left, right, value, roots):
    """Sum of leaf value vectors over all trees; node arrays are concatenated, children global."""
    n = X.shape[0]
    n_out = value.shape[1]
    out = np.zeros((n, n_out))
    for t in range(roots.shape[0]):
        root = roots[t]
        for i in range(n):
            node = root
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            for k in range(n_out):
                out[i, k] += value[node, k]
    return out
