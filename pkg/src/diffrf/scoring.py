"""Point-wise, frequency-ratio and collective anomaly scores.

All scores are oriented so that larger means more anomalous: a point sitting
on every leaf centroid scores -1 and a point infinitely far away scores 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .exceptions import InputError
from .forest import as_matrix, default_threads, locate_leaf

POINTWISE = "pointwise"
COLLECTIVE = "collective"
FREQUENCY = "frequency"
IFOREST = "iforest"
SCORE_KINDS = (POINTWISE, COLLECTIVE, FREQUENCY, IFOREST)


@dataclass
class ScoreVector:
    scores: np.ndarray
    kind: str
    config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.scores)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.scores, dtype=dtype)


def leaf_distance(stats, x):
    """Mean squared per-dimension z-score of ``x`` w.r.t. the leaf centroid."""
    x = np.asarray(x, dtype=np.float64).ravel()
    centroid = np.asarray(stats.centroid, dtype=np.float64)
    if x.shape != centroid.shape:
        raise InputError(f"x has {x.size} features, leaf has {centroid.size}")
    r = (x - centroid) / stats.sigma
    return float(np.dot(r, r) / x.size)


def similarity(distance, alpha):
    """``2 ** (-alpha * distance)``; underflows to exactly 0."""
    return np.exp2(-alpha * np.asarray(distance, dtype=np.float64))


def tree_similarity(tree, x, alpha):
    return float(similarity(leaf_distance(locate_leaf(tree, x), x), alpha))


def _kern(backend):
    return _backend.get(backend)


def _threads(threads):
    return default_threads() if threads is None else max(1, int(threads))


def _echo(forest, alpha):
    cfg = forest.config
    return {"tree_count": cfg.tree_count, "sample_size": cfg.sample_size,
            "alpha": alpha, "height_factor": cfg.height_factor, "seed": cfg.seed}


def leaf_distances(forest, X, *, threads=None, backend="auto"):
    """Distances to the reached leaf centroid for every (instance, tree), shape (n, t)."""
    X = as_matrix(X, forest.n_features)
    p = forest.packed
    return _kern(backend).leaf_distances(X, *p.routing, p.centroid, p.sigma, _threads(threads))


def apply(forest, X, *, threads=None, backend="auto"):
    """Global leaf index reached in every tree, shape (n, t)."""
    X = as_matrix(X, forest.n_features)
    return _kern(backend).apply(X, *forest.packed.routing, _threads(threads))


def pointwise_score(forest, X, *, alpha=None, threads=None, backend="auto"):
    """Negated mean per-tree similarity; in [-1, 0]."""
    alpha = forest.config.alpha if alpha is None else float(alpha)
    X = as_matrix(X, forest.n_features)
    p = forest.packed
    sims = _kern(backend).pointwise_mean(X, *p.routing, p.centroid, p.sigma, alpha,
                                         _threads(threads))
    return ScoreVector(-sims, POINTWISE, _echo(forest, alpha))


def batch_scores(forest, X, *, alpha=None, threads=None, backend="auto"):
    """Point-wise, frequency and collective scores of the batch ``X`` in one pass.

    ``X`` is its own context: leaf visit frequencies are measured on the whole batch.
    """
    alpha = forest.config.alpha if alpha is None else float(alpha)
    X = as_matrix(X, forest.n_features)
    p = forest.packed
    kern = _kern(backend)
    n_threads = _threads(threads)
    echo = _echo(forest, alpha)
    if len(X) == 0:
        empty = np.empty(0)
        return {k: ScoreVector(empty.copy(), k, echo) for k in (POINTWISE, FREQUENCY, COLLECTIVE)}
    counts = kern.leaf_counts(X, *p.routing, p.n_leaves, n_threads)
    sims, ratios, prods = kern.collective_means(X, *p.routing, p.centroid, p.sigma,
                                                p.train_freq, counts, alpha, n_threads)
    return {
        POINTWISE: ScoreVector(-sims, POINTWISE, echo),
        FREQUENCY: ScoreVector(-ratios, FREQUENCY, echo),
        COLLECTIVE: ScoreVector(-prods, COLLECTIVE, echo),
    }


def frequency_score(forest, X, **kwargs):
    """Negated mean ratio of train to batch leaf visit frequencies."""
    return batch_scores(forest, X, **kwargs)[FREQUENCY]


def collective_scores(forest, X, **kwargs):
    """Negated mean of similarity times visit-frequency ratio, batch ``X`` as context."""
    return batch_scores(forest, X, **kwargs)[COLLECTIVE]


def score(forest, X, mode, **kwargs):
    if mode == POINTWISE:
        return pointwise_score(forest, X, **kwargs)
    if mode in (COLLECTIVE, FREQUENCY):
        return batch_scores(forest, X, **kwargs)[mode]
    raise ValueError(f"unknown score mode {mode!r}")
