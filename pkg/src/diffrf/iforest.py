"""Isolation Forest baseline on the same flat-tree machinery.

Split dimensions are drawn uniformly among the non-constant ones; a point's
score is ``2 ** (-E[h(x)] / c(psi))`` where ``h`` is the depth reached plus
``c(leaf size)`` for the instances left unisolated in that leaf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .exceptions import ConfigurationError
from .forest import (ForestConfig, PackedForest, _map_trees, as_matrix, build_tree,
                     default_threads, pack, tree_rng)
from .scoring import IFOREST, ScoreVector

EULER_GAMMA = 0.5772156649


def harmonic(k):
    return math.log(k) + EULER_GAMMA


def average_path_length(m):
    """Average unsuccessful-search path length in a BST of ``m`` nodes; c(1) = 0."""
    m = int(m)
    if m <= 1:
        return 0.0
    if m == 2:
        return 1.0
    return 2.0 * harmonic(m - 1) - 2.0 * (m - 1) / m


@dataclass
class IsoForest:
    config: ForestConfig
    n_features: int
    trees: list
    kind: str = "iforest"
    packed: PackedForest = field(init=False, repr=False)
    path_value: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.packed = pack(self.trees)
        c = np.array([average_path_length(m) for m in self.packed.leaf_count])
        self.path_value = self.packed.leaf_depth + c

    @property
    def max_height(self):
        return self.config.max_height

    def __len__(self):
        return len(self.trees)


def build_iforest(train, tree_count=128, sample_size=256, seed=0, *, threads=None,
                  backend="auto"):
    X = as_matrix(train, name="train")
    cfg = ForestConfig(tree_count=tree_count, sample_size=sample_size, seed=seed)
    psi = cfg.sample_size
    if psi > len(X):
        raise ConfigurationError(f"sample_size {psi} exceeds training rows {len(X)}")
    h_max = cfg.max_height

    def one(i):
        rng = tree_rng(seed, i)
        idx = rng.choice(len(X), psi, replace=False)
        return build_tree(X[idx], psi, h_max, rng, weighted=False, with_stats=False,
                          backend=backend)

    return IsoForest(cfg, X.shape[1], _map_trees(one, tree_count, threads))


def mean_path_length(forest, X, *, threads=None, backend="auto"):
    X = as_matrix(X, forest.n_features)
    threads = default_threads() if threads is None else max(1, int(threads))
    return _backend.get(backend).leaf_value_mean(X, *forest.packed.routing, forest.path_value,
                                                  threads)


def iforest_score(forest, X, **kwargs):
    """Anomaly score in (0, 1]; 0.5 at the average path length."""
    h = mean_path_length(forest, X, **kwargs)
    c = average_path_length(forest.config.sample_size)
    s = np.exp2(-h / c) if c > 0 else np.ones_like(h)
    cfg = forest.config
    return ScoreVector(s, IFOREST, {"tree_count": cfg.tree_count,
                                    "sample_size": cfg.sample_size, "seed": cfg.seed})
