"""Naive reference implementations used as test oracles.

Plain Python over lists of tuples, nested-dict trees and explicit loops; no
imports from the package under test. The builder consumes a pre-drawn stream
of uniforms with the same contract as the real one: two draws per internal
node in pre-order, first the dimension (inverse CDF over the dimension
weights), then the split position ``min + u * (max - min)``.
"""

import math


def entropy_weight(values):
    n = len(values)
    nb = min(max(int(math.floor(n / 10 + 0.5)), 5), 100)
    lo, hi = min(values), max(values)
    counts = [0] * nb
    for v in values:
        k = int((v - lo) / (hi - lo) * nb)
        counts[min(k, nb - 1)] += 1
    h = 0.0
    for c in counts:
        if c:
            p = c / n
            h += p * math.log2(p)
    return max(1.0 - (-h / math.log2(nb)), 0.2)


def build(rows, uniforms, h_max, weighted=True):
    """Nested-dict tree: leaves are {'rows': [...], 'depth': h}."""
    stream = iter(uniforms)

    def grow(S, h):
        d = len(S[0])
        if h >= h_max or len(S) <= 1:
            return {"rows": S, "depth": h}
        lows = [min(r[j] for r in S) for j in range(d)]
        highs = [max(r[j] for r in S) for j in range(d)]
        live = [highs[j] > lows[j] for j in range(d)]
        if not any(live):
            return {"rows": S, "depth": h}
        w = []
        for j in range(d):
            if not live[j]:
                w.append(0.0)
            elif weighted and len(S) > 10:
                w.append(entropy_weight([r[j] for r in S]))
            else:
                w.append(1.0)
        target = next(stream) * sum(w)
        acc, q = 0.0, None
        for j in range(d):
            if w[j] > 0:
                acc += w[j]
                q = j
                if target < acc:
                    break
        p = lows[q] + next(stream) * (highs[q] - lows[q])
        if p <= lows[q]:
            p = math.nextafter(lows[q], math.inf)
        return {"q": q, "p": p, "depth": h,
                "left": grow([r for r in S if r[q] < p], h + 1),
                "right": grow([r for r in S if not r[q] < p], h + 1)}

    return grow([tuple(r) for r in rows], 0)


def leaves(tree):
    if "rows" in tree:
        return [tree]
    return leaves(tree["left"]) + leaves(tree["right"])


def preorder(tree):
    """(feature, threshold, depth) per node, feature -1 for leaves."""
    if "rows" in tree:
        return [(-1, 0.0, tree["depth"])]
    return [(tree["q"], tree["p"], tree["depth"])] + preorder(tree["left"]) + preorder(tree["right"])


def find_leaf(tree, x):
    while "rows" not in tree:
        tree = tree["left"] if x[tree["q"]] < tree["p"] else tree["right"]
    return tree


def leaf_moments(rows, floor):
    d = len(rows[0])
    n = len(rows)
    mean = [sum(r[j] for r in rows) / n for j in range(d)]
    std = [math.sqrt(sum((r[j] - mean[j]) ** 2 for r in rows) / n) for j in range(d)]
    return mean, [max(s, f) for s, f in zip(std, floor)]


def sigma_floor(sample, abs_floor=1e-12, rel_floor=1e-3):
    d = len(sample[0])
    n = len(sample)
    out = []
    for j in range(d):
        m = sum(r[j] for r in sample) / n
        out.append(max(abs_floor, rel_floor * math.sqrt(sum((r[j] - m) ** 2 for r in sample) / n)))
    return out


def scores(trees, samples, psi, X, alpha):
    """Point-wise, frequency and collective scores by explicit routing.

    ``trees`` are nested-dict trees grown on ``samples``.
    """
    floors = [sigma_floor(s) for s in samples]
    n = len(X)
    visits = []
    for tree in trees:
        cnt = {}
        for x in X:
            key = id(find_leaf(tree, x))
            cnt[key] = cnt.get(key, 0) + 1
        visits.append(cnt)
    pw, fr, co = [], [], []
    for x in X:
        s_sim = s_ratio = s_prod = 0.0
        for tree, floor, cnt in zip(trees, floors, visits):
            leaf = find_leaf(tree, x)
            mean, sig = leaf_moments(leaf["rows"], floor)
            dist = sum(((x[j] - mean[j]) / sig[j]) ** 2 for j in range(len(x))) / len(x)
            sim = 2.0 ** (-alpha * dist)
            ratio = (len(leaf["rows"]) / psi) / (cnt[id(leaf)] / n)
            s_sim += sim
            s_ratio += ratio
            s_prod += sim * ratio
        t = len(trees)
        pw.append(-s_sim / t)
        fr.append(-s_ratio / t)
        co.append(-s_prod / t)
    return pw, fr, co


def auc_all_pairs(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))
