"""Pure NumPy kernels, used when the compiled extension is unavailable.

Function signatures and random-stream consumption match :mod:`diffrf._core`.
``threads`` is accepted for interface parity and ignored.
"""

import math

import numpy as np


def _entropy_weight(col, n):
    nb = min(max((n + 5) // 10, 5), 100)
    mn = col.min()
    span = col.max() - mn
    idx = ((col - mn) / span * nb).astype(np.int64)
    np.minimum(idx, nb - 1, out=idx)
    bins = np.bincount(idx, minlength=nb)
    # sequential libm accumulation keeps results bit-identical to the C kernel
    h = 0.0
    for b in bins.tolist():
        if b > 0:
            p = b / n
            h = h + p * math.log2(p)
    w = 1.0 - (-h / math.log2(nb))
    return max(w, 0.2)


def build_tree(X, uniforms, h_max, weighted=True):
    m, d = X.shape
    if m == 0:
        raise ValueError("empty sample")
    if len(uniforms) < 2 * (m - 1):
        raise ValueError("uniform stream too short")
    uniforms = np.asarray(uniforms, dtype=np.float64).tolist()
    cap = 2 * m - 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    depth = np.zeros(cap, dtype=np.int32)
    start = np.zeros(cap, dtype=np.int64)
    count = np.zeros(cap, dtype=np.int64)
    order = np.arange(m, dtype=np.int64)
    state = {"nodes": 0, "u": 0}

    def draw():
        u = uniforms[state["u"]]
        state["u"] += 1
        return u

    def grow(lo, n, h):
        node = state["nodes"]
        state["nodes"] += 1
        depth[node] = h
        start[node] = lo
        count[node] = n
        if h >= h_max or n <= 1:
            return node
        rows = X[order[lo:lo + n]]
        mins = rows.min(axis=0)
        maxs = rows.max(axis=0)
        live = maxs > mins
        if not live.any():
            return node
        weights = []
        for j in range(d):
            if not live[j]:
                weights.append(0.0)
            elif weighted and n > 10:
                weights.append(_entropy_weight(rows[:, j], n))
            else:
                weights.append(1.0)
        total = 0.0
        for w in weights:
            total = total + w
        target = draw() * total
        cum = 0.0
        q = -1
        for j, w in enumerate(weights):
            if w > 0.0:
                cum = cum + w
                q = j
                if target < cum:
                    break
        u = draw()
        mn = float(mins[q])
        p = mn + u * (float(maxs[q]) - mn)
        if p <= mn:
            p = math.nextafter(mn, math.inf)
        goes_left = rows[:, q] < p
        seg = order[lo:lo + n]
        order[lo:lo + n] = np.concatenate([seg[goes_left], seg[~goes_left]])
        nl = int(goes_left.sum())
        feature[node] = q
        threshold[node] = p
        left[node] = grow(lo, nl, h + 1)
        right[node] = grow(lo + nl, n - nl, h + 1)
        return node

    grow(0, m, 0)
    k = state["nodes"]
    return (feature[:k].copy(), threshold[:k].copy(), left[:k].copy(), right[:k].copy(),
            depth[:k].copy(), start[:k].copy(), count[:k].copy(), order)


def _route_all(X, feature, threshold, left, right, root):
    node = np.full(len(X), root, dtype=np.int64)
    rows = np.arange(len(X))
    active = feature[node] >= 0
    while active.any():
        idx = rows[active]
        nd = node[idx]
        q = feature[nd]
        go_left = X[idx, q] < threshold[nd]
        node[idx] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return node


def apply(X, feature, threshold, left, right, leaf_of, roots, threads=1):
    out = np.empty((len(X), len(roots)), dtype=np.int32)
    for k, root in enumerate(roots):
        out[:, k] = leaf_of[_route_all(X, feature, threshold, left, right, root)]
    return out


def _distances(X, leaves, centroid, sigma):
    # accumulate dimension by dimension, matching the compiled loop's order
    r = (X - centroid[leaves]) / sigma[leaves]
    s = np.zeros(len(X))
    for j in range(X.shape[1]):
        s += r[:, j] * r[:, j]
    return s / X.shape[1]


def leaf_distances(X, feature, threshold, left, right, leaf_of, roots, centroid, sigma,
                   threads=1):
    leaves = apply(X, feature, threshold, left, right, leaf_of, roots)
    out = np.empty(leaves.shape, dtype=np.float64)
    for k in range(len(roots)):
        out[:, k] = _distances(X, leaves[:, k], centroid, sigma)
    return out


def pointwise_mean(X, feature, threshold, left, right, leaf_of, roots, centroid, sigma,
                   alpha, threads=1):
    acc = np.zeros(len(X))
    for root in roots:
        leaves = leaf_of[_route_all(X, feature, threshold, left, right, root)]
        acc += np.exp2(-alpha * _distances(X, leaves, centroid, sigma))
    return acc / len(roots)


def leaf_counts(X, feature, threshold, left, right, leaf_of, roots, n_leaves, threads=1):
    out = np.zeros(n_leaves, dtype=np.int64)
    for root in roots:
        leaves = leaf_of[_route_all(X, feature, threshold, left, right, root)]
        out += np.bincount(leaves, minlength=n_leaves)
    return out


def collective_means(X, feature, threshold, left, right, leaf_of, roots, centroid, sigma,
                     train_freq, counts, alpha, threads=1):
    n = len(X)
    s_sim = np.zeros(n)
    s_ratio = np.zeros(n)
    s_prod = np.zeros(n)
    for root in roots:
        leaves = leaf_of[_route_all(X, feature, threshold, left, right, root)]
        sim = np.exp2(-alpha * _distances(X, leaves, centroid, sigma))
        ratio = train_freq[leaves] / (counts[leaves] / n)
        s_sim += sim
        s_ratio += ratio
        s_prod += sim * ratio
    t = len(roots)
    return s_sim / t, s_ratio / t, s_prod / t


def leaf_value_mean(X, feature, threshold, left, right, leaf_of, roots, values, threads=1):
    acc = np.zeros(len(X))
    for root in roots:
        acc += values[leaf_of[_route_all(X, feature, threshold, left, right, root)]]
    return acc / len(roots)
