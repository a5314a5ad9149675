# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: tree construction, routing and leaf scoring.

Mirrors :mod:`diffrf._pycore` function by function. Both modules consume
the same pre-drawn uniform stream, so trees are identical across backends.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport log2, exp2, nextafter, INFINITY

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int32_t i32
ctypedef cnp.int64_t i64


cdef struct Builder:
    const f64* X
    Py_ssize_t d
    const f64* uniforms
    Py_ssize_t n_uniforms
    Py_ssize_t u_pos
    int h_max
    bint weighted
    i64* order
    i64* scratch
    i32* feature
    f64* threshold
    i32* left
    i32* right
    i32* depth
    i64* start
    i64* count
    Py_ssize_t n_nodes
    f64* weights
    f64* mins
    f64* maxs
    i64* bins


cdef inline double _next_uniform(Builder* b) noexcept nogil:
    cdef double u = b.uniforms[b.u_pos]
    b.u_pos += 1
    return u


cdef void _node_ranges(Builder* b, i64 lo, i64 n) noexcept nogil:
    cdef Py_ssize_t j, k
    cdef double v
    cdef const f64* row
    for j in range(b.d):
        b.mins[j] = INFINITY
        b.maxs[j] = -INFINITY
    for k in range(lo, lo + n):
        row = b.X + b.order[k] * b.d
        for j in range(b.d):
            v = row[j]
            if v < b.mins[j]:
                b.mins[j] = v
            if v > b.maxs[j]:
                b.maxs[j] = v


cdef double _entropy_weight(Builder* b, i64 lo, i64 n, Py_ssize_t j) noexcept nogil:
    # 1 - normalized histogram entropy, floored at 0.2
    cdef i64 nb = (n + 5) // 10
    cdef i64 k, idx
    cdef double mn = b.mins[j]
    cdef double span = b.maxs[j] - mn
    cdef double h = 0.0, p, ee, w
    if nb < 5:
        nb = 5
    elif nb > 100:
        nb = 100
    for k in range(nb):
        b.bins[k] = 0
    for k in range(lo, lo + n):
        idx = <i64>((b.X[b.order[k] * b.d + j] - mn) / span * nb)
        if idx >= nb:
            idx = nb - 1
        b.bins[idx] += 1
    for k in range(nb):
        if b.bins[k] > 0:
            p = <double>b.bins[k] / <double>n
            h = h + p * log2(p)
    ee = -h / log2(<double>nb)
    w = 1.0 - ee
    if w < 0.2:
        w = 0.2
    return w


cdef Py_ssize_t _grow(Builder* b, i64 lo, i64 n, int h) noexcept nogil:
    cdef Py_ssize_t node = b.n_nodes
    cdef Py_ssize_t j, q
    cdef bint splittable = False
    cdef double total, target, cum, u, p, mn, mx
    cdef i64 k, nl, nr, idx
    b.n_nodes += 1
    b.depth[node] = h
    b.start[node] = lo
    b.count[node] = n
    b.feature[node] = -1
    b.threshold[node] = 0.0
    b.left[node] = -1
    b.right[node] = -1
    if h >= b.h_max or n <= 1:
        return node
    _node_ranges(b, lo, n)
    for j in range(b.d):
        if b.maxs[j] > b.mins[j]:
            splittable = True
    if not splittable:
        return node

    total = 0.0
    for j in range(b.d):
        if b.maxs[j] > b.mins[j]:
            if b.weighted and n > 10:
                b.weights[j] = _entropy_weight(b, lo, n, j)
            else:
                b.weights[j] = 1.0
        else:
            b.weights[j] = 0.0
        total = total + b.weights[j]

    u = _next_uniform(b)
    target = u * total
    cum = 0.0
    q = -1
    for j in range(b.d):
        if b.weights[j] > 0.0:
            cum = cum + b.weights[j]
            q = j
            if target < cum:
                break

    u = _next_uniform(b)
    mn = b.mins[q]
    mx = b.maxs[q]
    p = mn + u * (mx - mn)
    if p <= mn:
        p = nextafter(mn, INFINITY)

    # stable partition of order[lo:lo+n]
    nl = 0
    nr = 0
    for k in range(lo, lo + n):
        idx = b.order[k]
        if b.X[idx * b.d + q] < p:
            b.order[lo + nl] = idx
            nl += 1
        else:
            b.scratch[nr] = idx
            nr += 1
    for k in range(nr):
        b.order[lo + nl + k] = b.scratch[k]

    b.feature[node] = <i32>q
    b.threshold[node] = p
    b.left[node] = <i32>_grow(b, lo, nl, h + 1)
    b.right[node] = <i32>_grow(b, lo + nl, nr, h + 1)
    return node


def build_tree(const f64[:, ::1] X, const f64[::1] uniforms, int h_max, bint weighted=True):
    """Grow one random partitioning tree on ``X``.

    Returns ``(feature, threshold, left, right, depth, start, count, order)``
    with nodes numbered in pre-order; ``order[start:start+count]`` lists the
    sample rows reaching each node in their original relative order.
    """
    cdef Py_ssize_t m = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t cap = 2 * m - 1 if m > 0 else 1
    cdef Builder b
    if m == 0:
        raise ValueError("empty sample")
    if uniforms.shape[0] < 2 * (m - 1):
        raise ValueError("uniform stream too short")

    order = np.arange(m, dtype=np.int64)
    scratch = np.empty(m, dtype=np.int64)
    feature = np.empty(cap, dtype=np.int32)
    threshold = np.empty(cap, dtype=np.float64)
    left = np.empty(cap, dtype=np.int32)
    right = np.empty(cap, dtype=np.int32)
    depth = np.empty(cap, dtype=np.int32)
    start = np.empty(cap, dtype=np.int64)
    count = np.empty(cap, dtype=np.int64)
    weights = np.empty(d, dtype=np.float64)
    mins = np.empty(d, dtype=np.float64)
    maxs = np.empty(d, dtype=np.float64)
    bins = np.empty(100, dtype=np.int64)

    cdef i64[::1] v_order = order, v_scratch = scratch, v_start = start, v_count = count, v_bins = bins
    cdef i32[::1] v_feature = feature, v_left = left, v_right = right, v_depth = depth
    cdef f64[::1] v_threshold = threshold, v_weights = weights, v_mins = mins, v_maxs = maxs

    b.X = &X[0, 0]
    b.d = d
    b.uniforms = &uniforms[0] if uniforms.shape[0] > 0 else NULL
    b.n_uniforms = uniforms.shape[0]
    b.u_pos = 0
    b.h_max = h_max
    b.weighted = weighted
    b.order = &v_order[0]
    b.scratch = &v_scratch[0]
    b.feature = &v_feature[0]
    b.threshold = &v_threshold[0]
    b.left = &v_left[0]
    b.right = &v_right[0]
    b.depth = &v_depth[0]
    b.start = &v_start[0]
    b.count = &v_count[0]
    b.n_nodes = 0
    b.weights = &v_weights[0]
    b.mins = &v_mins[0]
    b.maxs = &v_maxs[0]
    b.bins = &v_bins[0]

    with nogil:
        _grow(&b, 0, m, 0)

    k = b.n_nodes
    return (feature[:k].copy(), threshold[:k].copy(), left[:k].copy(), right[:k].copy(),
            depth[:k].copy(), start[:k].copy(), count[:k].copy(), order)


cdef inline i32 _route(const f64* x, const i32* feature, const f64* threshold,
                       const i32* left, const i32* right, i32 node) noexcept nogil:
    cdef i32 q = feature[node]
    while q >= 0:
        if x[q] < threshold[node]:
            node = left[node]
        else:
            node = right[node]
        q = feature[node]
    return node


cdef inline double _distance(const f64* x, const f64* centroid, const f64* sigma,
                             Py_ssize_t d) noexcept nogil:
    cdef double s = 0.0, r
    cdef Py_ssize_t j
    for j in range(d):
        r = (x[j] - centroid[j]) / sigma[j]
        s = s + r * r
    return s / d


def apply(const f64[:, ::1] X, const i32[::1] feature, const f64[::1] threshold,
          const i32[::1] left, const i32[::1] right, const i32[::1] leaf_of,
          const i32[::1] roots, int threads=1):
    """Global leaf index reached by every (instance, tree) pair."""
    cdef Py_ssize_t n = X.shape[0], t = roots.shape[0], i, k
    cdef const i32* pf = &feature[0]
    cdef const f64* pt = &threshold[0]
    cdef const i32* pl = &left[0]
    cdef const i32* pr = &right[0]
    out = np.empty((n, t), dtype=np.int32)
    cdef i32[:, ::1] v_out = out
    if n == 0:
        return out
    for i in prange(n, nogil=True, num_threads=threads, schedule="static"):
        for k in range(t):
            v_out[i, k] = leaf_of[_route(&X[i, 0], pf, pt, pl, pr, roots[k])]
    return out


def leaf_distances(const f64[:, ::1] X, const i32[::1] feature, const f64[::1] threshold,
                   const i32[::1] left, const i32[::1] right, const i32[::1] leaf_of,
                   const i32[::1] roots, const f64[:, ::1] centroid, const f64[:, ::1] sigma,
                   int threads=1):
    """Weighted squared distance to the reached leaf centroid, shape (n, t)."""
    cdef Py_ssize_t n = X.shape[0], t = roots.shape[0], d = X.shape[1], i, k
    cdef const i32* pf = &feature[0]
    cdef const f64* pt = &threshold[0]
    cdef const i32* pl = &left[0]
    cdef const i32* pr = &right[0]
    cdef i32 leaf
    out = np.empty((n, t), dtype=np.float64)
    cdef f64[:, ::1] v_out = out
    if n == 0:
        return out
    for i in prange(n, nogil=True, num_threads=threads, schedule="static"):
        for k in range(t):
            leaf = leaf_of[_route(&X[i, 0], pf, pt, pl, pr, roots[k])]
            v_out[i, k] = _distance(&X[i, 0], &centroid[leaf, 0], &sigma[leaf, 0], d)
    return out


def pointwise_mean(const f64[:, ::1] X, const i32[::1] feature, const f64[::1] threshold,
                   const i32[::1] left, const i32[::1] right, const i32[::1] leaf_of,
                   const i32[::1] roots, const f64[:, ::1] centroid, const f64[:, ::1] sigma,
                   double alpha, int threads=1):
    """Mean over trees of ``2**(-alpha * distance)``."""
    cdef Py_ssize_t n = X.shape[0], t = roots.shape[0], d = X.shape[1], i, k
    cdef const i32* pf = &feature[0]
    cdef const f64* pt = &threshold[0]
    cdef const i32* pl = &left[0]
    cdef const i32* pr = &right[0]
    cdef i32 leaf
    cdef double acc
    out = np.empty(n, dtype=np.float64)
    cdef f64[::1] v_out = out
    if n == 0:
        return out
    for i in prange(n, nogil=True, num_threads=threads, schedule="static"):
        acc = 0.0
        for k in range(t):
            leaf = leaf_of[_route(&X[i, 0], pf, pt, pl, pr, roots[k])]
            acc = acc + exp2(-alpha * _distance(&X[i, 0], &centroid[leaf, 0], &sigma[leaf, 0], d))
        v_out[i] = acc / t
    return out


def leaf_counts(const f64[:, ::1] X, const i32[::1] feature, const f64[::1] threshold,
                const i32[::1] left, const i32[::1] right, const i32[::1] leaf_of,
                const i32[::1] roots, Py_ssize_t n_leaves, int threads=1):
    """Number of rows of ``X`` reaching each leaf."""
    cdef Py_ssize_t n = X.shape[0], t = roots.shape[0], i, k
    cdef const i32* pf = &feature[0]
    cdef const f64* pt = &threshold[0]
    cdef const i32* pl = &left[0]
    cdef const i32* pr = &right[0]
    out = np.zeros(n_leaves, dtype=np.int64)
    cdef i64[::1] v_out = out
    # trees own disjoint leaf ranges, so per-tree accumulation is race free
    for k in prange(t, nogil=True, num_threads=threads, schedule="static"):
        for i in range(n):
            v_out[leaf_of[_route(&X[i, 0], pf, pt, pl, pr, roots[k])]] += 1
    return out


def collective_means(const f64[:, ::1] X, const i32[::1] feature, const f64[::1] threshold,
                     const i32[::1] left, const i32[::1] right, const i32[::1] leaf_of,
                     const i32[::1] roots, const f64[:, ::1] centroid, const f64[:, ::1] sigma,
                     const f64[::1] train_freq, const i64[::1] counts, double alpha,
                     int threads=1):
    """Per-instance tree means of similarity, frequency ratio and their product.

    ``counts`` holds the visits of the whole batch ``X`` (see :func:`leaf_counts`).
    """
    cdef Py_ssize_t n = X.shape[0], t = roots.shape[0], d = X.shape[1], i, k
    cdef const i32* pf = &feature[0]
    cdef const f64* pt = &threshold[0]
    cdef const i32* pl = &left[0]
    cdef const i32* pr = &right[0]
    cdef i32 leaf
    cdef double s_sim, s_ratio, s_prod, sim, ratio
    sims = np.empty(n, dtype=np.float64)
    ratios = np.empty(n, dtype=np.float64)
    prods = np.empty(n, dtype=np.float64)
    cdef f64[::1] v_sims = sims, v_ratios = ratios, v_prods = prods
    if n == 0:
        return sims, ratios, prods
    for i in prange(n, nogil=True, num_threads=threads, schedule="static"):
        s_sim = 0.0
        s_ratio = 0.0
        s_prod = 0.0
        for k in range(t):
            leaf = leaf_of[_route(&X[i, 0], pf, pt, pl, pr, roots[k])]
            sim = exp2(-alpha * _distance(&X[i, 0], &centroid[leaf, 0], &sigma[leaf, 0], d))
            ratio = train_freq[leaf] / (<double>counts[leaf] / <double>n)
            s_sim = s_sim + sim
            s_ratio = s_ratio + ratio
            s_prod = s_prod + sim * ratio
        v_sims[i] = s_sim / t
        v_ratios[i] = s_ratio / t
        v_prods[i] = s_prod / t
    return sims, ratios, prods


def leaf_value_mean(const f64[:, ::1] X, const i32[::1] feature, const f64[::1] threshold,
                    const i32[::1] left, const i32[::1] right, const i32[::1] leaf_of,
                    const i32[::1] roots, const f64[::1] values, int threads=1):
    """Mean over trees of a per-leaf value (path lengths for isolation trees)."""
    cdef Py_ssize_t n = X.shape[0], t = roots.shape[0], i, k
    cdef const i32* pf = &feature[0]
    cdef const f64* pt = &threshold[0]
    cdef const i32* pl = &left[0]
    cdef const i32* pr = &right[0]
    cdef double acc
    out = np.empty(n, dtype=np.float64)
    cdef f64[::1] v_out = out
    if n == 0:
        return out
    for i in prange(n, nogil=True, num_threads=threads, schedule="static"):
        acc = 0.0
        for k in range(t):
            acc = acc + values[leaf_of[_route(&X[i, 0], pf, pt, pl, pr, roots[k])]]
        v_out[i] = acc / t
    return out
