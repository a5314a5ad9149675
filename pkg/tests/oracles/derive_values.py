"""Independent derivations of the constants frozen into the unit tests.

Uses only the standard library (exact fractions where possible) and never
imports the package under test. Run it to regenerate the printed values:

    python3 tests/oracles/derive_values.py
"""

import itertools
import math
import random
from fractions import Fraction


def split_weights(ee):
    raw = [max(1 - Fraction(e), Fraction(1, 5)) for e in ee]
    total = sum(raw)
    return [w / total for w in raw]


def weighted_distance(x, m, s):
    return sum(Fraction(xi - mi, si) ** 2 for xi, mi, si in zip(x, m, s)) / len(x)


def tail_distance(test, train):
    """Brute force: walk the sorted train list to find each nearest-rank percentile."""
    srt = sorted(train)
    n = len(srt)
    total = Fraction(0)
    for i in range(95, 100):
        rank = 1
        while Fraction(rank, n) < Fraction(i, 100):
            rank += 1
        q = srt[rank - 1]
        above = sum(1 for v in test if v > q)
        total += abs(Fraction(100 * above, len(test)) - (100 - i))
    return total


def auc_pairs(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(Fraction(1) if p > q else Fraction(1, 2) if p == q else 0
               for p, q in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def average_precision(ranked_labels):
    hits, total = 0, Fraction(0)
    for k, y in enumerate(ranked_labels, start=1):
        if y:
            hits += 1
            total += Fraction(hits, k)
    return total / hits


def fold_sizes(n, psi):
    k = n // psi
    return [n // k + (1 if i < n % k else 0) for i in range(k)]


def annulus_mean_radius(ri, ro):
    # E[r] for density 2r/(ro^2 - ri^2) on [ri, ro]
    return Fraction(2, 3) * (Fraction(ro) ** 3 - Fraction(ri) ** 3) / (Fraction(ro) ** 2 - Fraction(ri) ** 2)


def ks_uniform_shift(shift, n, trials, seed=12345):
    rng = random.Random(seed)
    stats = []
    for _ in range(trials):
        a = sorted(rng.random() for _ in range(n))
        b = sorted(shift + rng.random() for _ in range(n))
        i = j = 0
        d = 0.0
        while i < n and j < n:
            if a[i] <= b[j]:
                i += 1
            else:
                j += 1
            d = max(d, abs(i / n - j / n))
        stats.append(d)
    return sum(stats) / trials


def c_path(m):
    if m <= 1:
        return 0.0
    if m == 2:
        return 1.0
    h = math.log(m - 1) + 0.5772156649
    return 2 * h - 2 * (m - 1) / m


if __name__ == "__main__":
    w = split_weights([0, 1])
    print("split_weights(EE=(0,1)) =", [str(v) for v in w], [float(v) for v in w])
    print("split_weights(EE=(1,1)) =", [float(v) for v in split_weights([1, 1])])
    print("distance d=3 =", weighted_distance((2, 4, 3), (1, 2, 3), (1, 2, 1)))
    print("2**(-10*0.3) =", 2.0 ** -3)
    print("t=3 similarities (1, 1/4, 1/4) mean =", -(Fraction(1) + Fraction(1, 4) + Fraction(1, 4)) / 3)
    vals = list(range(100))
    print("tail_distance(same 100) =", tail_distance(vals, vals))
    print("tail_distance(all below) =", tail_distance([-1] * 10, vals))
    print("tail_distance(all above) =", tail_distance([1000] * 10, vals))
    print("tail_distance(0..199 vs 0..99) =", tail_distance(list(range(200)), vals))
    print("auc((.1,.4,.35,.8),(0,0,1,1)) =", auc_pairs([.1, .4, .35, .8], [0, 0, 1, 1]))
    print("ap(one positive 2nd of 4) =", average_precision([0, 1, 0, 0]))
    print("fold sizes 100/25 =", fold_sizes(100, 25), "103/25 =", fold_sizes(103, 25),
          "2000/256 =", sorted(set(fold_sizes(2000, 256))), len(fold_sizes(2000, 256)))
    r = annulus_mean_radius(Fraction(3, 2), 4)
    print("annulus mean radius =", r, float(r))
    print("KS U[0,1] vs U[.3,1.3], n=1000 (20 trials) =", ks_uniform_shift(0.3, 1000, 20))
    print("c(psi) for 2, 3, 256, 512 =", [c_path(m) for m in (2, 3, 256, 512)])
