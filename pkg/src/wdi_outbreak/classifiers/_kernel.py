"""Compiled best-split search for binary Gini trees."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def gini(w0, w1):
    t = w0 + w1
    if t <= 0.0:
        return 0.0
    p0 = w0 / t
    p1 = w1 / t
    return 1.0 - p0 * p0 - p1 * p1


@njit(cache=True, nogil=True)
def best_split(X, y, w, idx, features, min_gain):
    """Best (feature, threshold, gain) over ``features`` for rows ``idx``.

    Features are scanned in the given (ascending) order and thresholds from
    low to high; only a strictly larger gain replaces the incumbent, so ties
    go to the lowest feature index and then the lowest threshold. Returns
    feature -1 when no split beats ``min_gain``.
    """
    n = idx.shape[0]
    tw0 = 0.0
    tw1 = 0.0
    for i in range(n):
        r = idx[i]
        if y[r] == 1:
            tw1 += w[r]
        else:
            tw0 += w[r]
    tw = tw0 + tw1
    parent = gini(tw0, tw1)
    best_f = -1
    best_t = 0.0
    best_g = min_gain
    vals = np.empty(n)
    for fi in range(features.shape[0]):
        f = features[fi]
        for i in range(n):
            vals[i] = X[idx[i], f]
        order = np.argsort(vals, kind="mergesort")
        lw0 = 0.0
        lw1 = 0.0
        for pos in range(n - 1):
            r = idx[order[pos]]
            if y[r] == 1:
                lw1 += w[r]
            else:
                lw0 += w[r]
            v = vals[order[pos]]
            vn = vals[order[pos + 1]]
            if vn <= v:
                continue
            lw = lw0 + lw1
            rw0 = tw0 - lw0
            rw1 = tw1 - lw1
            rw = rw0 + rw1
            if rw < 0.0:
                rw = 0.0
            g = parent - (lw / tw) * gini(lw0, lw1) - (rw / tw) * gini(rw0, rw1)
            if g > best_g:
                best_g = g
                best_f = f
                t = 0.5 * (v + vn)
                if t >= vn:
                    t = v
                best_t = t
    return best_f, best_t, best_g


@njit(cache=True, nogil=True)
def best_split_ranked(R, V, y, idx, features, min_gain):
    """Unit-weight variant of :func:`best_split` working on integer ranks.

    ``R[f, i]`` is the rank of ``X[i, f]`` among the distinct values of
    column f and ``V[f, r]`` the value of rank r. Sorting packed
    ``rank * 2 + label`` keys avoids an argsort plus gather per feature.
    Same tie rules and result as the weighted scan with unit weights.
    """
    n = idx.shape[0]
    t1 = 0.0
    for i in range(n):
        t1 += y[idx[i]]
    tw = float(n)
    t0 = tw - t1
    parent = gini(t0, t1)
    best_f = -1
    best_t = 0.0
    best_g = min_gain
    keys = np.empty(n, dtype=np.int64)
    for fi in range(features.shape[0]):
        f = features[fi]
        for i in range(n):
            r = idx[i]
            keys[i] = R[f, r] * 2 + y[r]
        keys.sort()
        l1 = 0.0
        for pos in range(n - 1):
            l1 += keys[pos] & 1
            rk = keys[pos] >> 1
            rn = keys[pos + 1] >> 1
            if rn == rk:
                continue
            lw = float(pos + 1)
            l0 = lw - l1
            rw = tw - lw
            g = parent - (lw / tw) * gini(l0, l1) - (rw / tw) * gini(t0 - l0, t1 - l1)
            if g > best_g:
                best_g = g
                best_f = f
                v = V[f, rk]
                vn = V[f, rn]
                t = 0.5 * (v + vn)
                if t >= vn:
                    t = v
                best_t = t
    return best_f, best_t, best_g


@njit(cache=True, nogil=True)
def apply_tree(X, feature, threshold, left, right):
    """Leaf index reached by every row of ``X``."""
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
def _splitmix(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return state, z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def grow(X, y, w, max_depth, min_samples_split, n_sub, seed, min_gain, R, V, unit):
    """Depth-first CART growth over contiguous index ranges.

    ``max_depth < 0`` means unlimited. With ``n_sub`` below the feature count
    each node scans a uniform random subset of that size (partial
    Fisher-Yates driven by a splitmix64 stream seeded with ``seed``).
    Returns the node arrays trimmed to the node count.
    """
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    weight = np.zeros(cap)
    value = np.zeros(cap)
    impurity = np.zeros(cap)
    decrease = np.zeros(cap)

    idx = np.arange(n)
    st_node = np.empty(cap, dtype=np.int64)
    st_lo = np.empty(cap, dtype=np.int64)
    st_hi = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    perm = np.arange(d)
    state = np.uint64(seed)

    tw0 = 0.0
    tw1 = 0.0
    for i in range(n):
        if y[i] == 1:
            tw1 += w[i]
        else:
            tw0 += w[i]
    weight[0] = tw0 + tw1
    value[0] = tw1 / (tw0 + tw1) if tw0 + tw1 > 0 else 0.0
    impurity[0] = gini(tw0, tw1)
    count = 1
    top = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_depth[0] = 0
    top = 1
    while top > 0:
        top -= 1
        t = st_node[top]
        lo = st_lo[top]
        hi = st_hi[top]
        depth = st_depth[top]
        if max_depth >= 0 and depth >= max_depth:
            continue
        if hi - lo < min_samples_split or impurity[t] <= 0.0:
            continue
        if n_sub < d:
            for k in range(n_sub):
                state, r = _splitmix(state)
                j = k + np.int64(r % np.uint64(d - k))
                tmp = perm[k]
                perm[k] = perm[j]
                perm[j] = tmp
            feats = np.sort(perm[:n_sub].copy())
        else:
            feats = perm[:d].copy()
            feats.sort()
        if unit:
            f, thr, g = best_split_ranked(R, V, y, idx[lo:hi], feats, min_gain)
        else:
            f, thr, g = best_split(X, y, w, idx[lo:hi], feats, min_gain)
        if f < 0:
            continue
        # in-place partition of idx[lo:hi]: rows with x <= thr first
        i = lo
        j = hi - 1
        while i <= j:
            if X[idx[i], f] <= thr:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        mid = i
        lt = count
        rt = count + 1
        count += 2
        for node, a, b in ((lt, lo, mid), (rt, mid, hi)):
            w0 = 0.0
            w1 = 0.0
            for q in range(a, b):
                r_ = idx[q]
                if y[r_] == 1:
                    w1 += w[r_]
                else:
                    w0 += w[r_]
            weight[node] = w0 + w1
            value[node] = w1 / (w0 + w1) if w0 + w1 > 0 else 0.0
            impurity[node] = gini(w0, w1)
        feature[t] = f
        threshold[t] = thr
        decrease[t] = g
        left[t] = lt
        right[t] = rt
        # right first so the left subtree is expanded first
        st_node[top] = rt
        st_lo[top] = mid
        st_hi[top] = hi
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lt
        st_lo[top] = lo
        st_hi[top] = mid
        st_depth[top] = depth + 1
        top += 1
    return (
        feature[:count],
        threshold[:count],
        left[:count],
        right[:count],
        weight[:count],
        value[:count],
        impurity[:count],
        decrease[:count],
    )
