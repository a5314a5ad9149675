"""Random partitioning forests with entropy-weighted split dimensions.

Trees are stored as flat arrays (pre-order node numbering). A :class:`Forest`
packs all of its trees into one set of global arrays consumed by the kernels
in :mod:`diffrf._backend`.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .exceptions import ConfigurationError, InputError

SIGMA_ABS_FLOOR = 1e-12
SIGMA_REL_FLOOR = 1e-3
UNIFORM_BELOW = 10
MIN_WEIGHT = 0.2


def as_matrix(X, n_features=None, name="X"):
    """Validate ``X`` as a finite 2-D float64 C-contiguous array."""
    arr = np.ascontiguousarray(X, dtype=np.float64)
    if arr.ndim == 1 and n_features is not None and arr.size == n_features:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[1] < 1:
        raise InputError(f"{name} has no feature columns")
    if n_features is not None and arr.shape[1] != n_features:
        raise InputError(f"{name} has {arr.shape[1]} features, expected {n_features}")
    if not np.isfinite(arr).all():
        bad = int(np.flatnonzero(~np.isfinite(arr).all(axis=1))[0])
        raise InputError(f"{name} contains non-finite values (row {bad})")
    return arr


def default_threads():
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# split-dimension distribution


def bin_count(n):
    """Histogram size for a node holding ``n`` instances: 10 %, clamped to [5, 100]."""
    return min(max((n + 5) // 10, 5), 100)


def normalized_entropy(column, bin_count):
    """Histogram entropy of ``column`` divided by ``log2(bin_count)``.

    Bins split ``[min, max]`` uniformly and the maximum falls in the last bin.
    A constant column occupies one bin and has entropy 0.
    """
    col = np.asarray(column, dtype=np.float64).ravel()
    if col.size == 0:
        raise InputError("column must be non-empty")
    if bin_count < 2:
        raise ConfigurationError("bin_count must be >= 2")
    mn, mx = col.min(), col.max()
    if not mx > mn:
        return 0.0
    idx = ((col - mn) / (mx - mn) * bin_count).astype(np.int64)
    np.minimum(idx, bin_count - 1, out=idx)
    p = np.bincount(idx, minlength=bin_count) / col.size
    p = p[p > 0]
    ee = float(-(p * np.log2(p)).sum() / math.log2(bin_count))
    return min(max(ee, 0.0), 1.0)


def weights_from_entropies(entropies):
    """Normalized ``max(1 - EE, 0.2)`` weights."""
    w = np.maximum(1.0 - np.asarray(entropies, dtype=np.float64), MIN_WEIGHT)
    return w / w.sum()


def split_distribution(sample):
    """Probability of picking each dimension to split ``sample``.

    Samples of at most 10 rows get the uniform distribution; larger ones favor
    low-entropy dimensions. Constant dimensions get probability 0 (uniform if
    every dimension is constant, though the builder makes such a node a leaf).
    """
    S = as_matrix(sample, name="sample")
    n, d = S.shape
    if n <= UNIFORM_BELOW:
        return np.full(d, 1.0 / d)
    live = S.max(axis=0) > S.min(axis=0)
    if not live.any():
        return np.full(d, 1.0 / d)
    nb = bin_count(n)
    w = np.maximum(1.0 - np.array([normalized_entropy(S[:, j], nb) for j in range(d)]),
                   MIN_WEIGHT)
    w[~live] = 0.0
    return w / w.sum()


# ---------------------------------------------------------------------------
# configuration and tree containers


@dataclass(frozen=True)
class ForestConfig:
    tree_count: int = 128
    sample_size: int = 256
    alpha: float = 1.0
    height_factor: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.tree_count) < 1:
            raise ConfigurationError("tree_count must be >= 1")
        if int(self.sample_size) < 1:
            raise ConfigurationError("sample_size must be >= 1")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigurationError("alpha must be a positive finite number")
        if not 1.0 <= self.height_factor <= 2.0:
            raise ConfigurationError("height_factor must lie in [1.0, 2.0]")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")

    @property
    def max_height(self):
        return max_height(self.sample_size, self.height_factor)

    def replace(self, **changes):
        fields = dict(tree_count=self.tree_count, sample_size=self.sample_size,
                      alpha=self.alpha, height_factor=self.height_factor, seed=self.seed)
        fields.update(changes)
        return ForestConfig(**fields)


def max_height(sample_size, height_factor=1.0):
    """``ceil(height_factor * log2(sample_size))``, at least 1."""
    return max(1, math.ceil(height_factor * math.log2(sample_size)))


@dataclass(frozen=True)
class LeafStats:
    centroid: np.ndarray
    sigma: np.ndarray
    train_freq: float
    train_count: int
    depth: int


@dataclass
class Tree:
    """One tree in flat form. ``leaf_index[node]`` is -1 for internal nodes."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_index: np.ndarray
    leaf_count: np.ndarray
    leaf_depth: np.ndarray
    sample_size: int
    centroid: np.ndarray | None = None
    sigma: np.ndarray | None = None

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def n_leaves(self):
        return len(self.leaf_count)

    @property
    def train_freq(self):
        return self.leaf_count / self.sample_size

    def leaf(self, i):
        return LeafStats(
            centroid=None if self.centroid is None else self.centroid[i],
            sigma=None if self.sigma is None else self.sigma[i],
            train_freq=float(self.leaf_count[i] / self.sample_size),
            train_count=int(self.leaf_count[i]),
            depth=int(self.leaf_depth[i]),
        )

    def locate(self, x):
        """Index of the leaf reached by ``x`` (``x[q] < p`` goes left)."""
        x = np.asarray(x, dtype=np.float64).ravel()
        node = 0
        q = self.feature[node]
        while q >= 0:
            if q >= x.size:
                raise InputError(f"x has {x.size} features, tree splits on feature {q}")
            node = self.left[node] if x[q] < self.threshold[node] else self.right[node]
            q = self.feature[node]
        return int(self.leaf_index[node])


def locate_leaf(tree, x):
    """Leaf statistics of the leaf reached by ``x``."""
    if tree.centroid is not None and np.size(x) != tree.centroid.shape[1]:
        raise InputError(f"x has {np.size(x)} features, expected {tree.centroid.shape[1]}")
    return tree.leaf(tree.locate(x))


def _leaf_moments(sample, order, starts, counts):
    rows = sample[order]
    mean = np.add.reduceat(rows, starts, axis=0) / counts[:, None]
    resid = rows - np.repeat(mean, counts, axis=0)
    std = np.sqrt(np.add.reduceat(resid * resid, starts, axis=0) / counts[:, None])
    return mean, std


def build_tree(sample, sample_size, h_max, rng, *, weighted=True, with_stats=True,
               backend="auto"):
    """Grow one tree on ``sample``.

    The random stream supplies ``2 * (len(sample) - 1)`` uniforms up front: two per
    potential internal node (dimension pick, then split position) in pre-order.
    """
    S = as_matrix(sample, name="sample")
    if h_max < 1:
        raise ConfigurationError("h_max must be >= 1")
    m = len(S)
    uniforms = rng.random(2 * (m - 1))
    kern = _backend.get(backend)
    feature, threshold, left, right, depth, start, count, order = kern.build_tree(
        S, uniforms, int(h_max), bool(weighted))
    is_leaf = feature < 0
    leaf_index = np.full(len(feature), -1, dtype=np.int32)
    leaf_index[is_leaf] = np.arange(int(is_leaf.sum()), dtype=np.int32)
    starts, counts = start[is_leaf], count[is_leaf]
    tree = Tree(feature=feature, threshold=threshold, left=left, right=right,
                leaf_index=leaf_index, leaf_count=counts, leaf_depth=depth[is_leaf],
                sample_size=int(sample_size))
    if with_stats:
        mean, std = _leaf_moments(S, order, starts, counts)
        floor = np.maximum(SIGMA_ABS_FLOOR, SIGMA_REL_FLOOR * S.std(axis=0))
        tree.centroid = mean
        tree.sigma = np.maximum(std, floor)
    return tree


# ---------------------------------------------------------------------------
# forest


@dataclass
class PackedForest:
    """All trees concatenated; node and leaf indices are global."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_of: np.ndarray
    roots: np.ndarray
    leaf_offsets: np.ndarray
    leaf_count: np.ndarray
    leaf_depth: np.ndarray
    train_freq: np.ndarray
    centroid: np.ndarray | None
    sigma: np.ndarray | None

    @property
    def routing(self):
        return (self.feature, self.threshold, self.left, self.right, self.leaf_of, self.roots)

    @property
    def n_leaves(self):
        return len(self.leaf_count)


def pack(trees):
    node_off = np.cumsum([0] + [t.n_nodes for t in trees])
    leaf_off = np.cumsum([0] + [t.n_leaves for t in trees])
    left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(trees, node_off)])
    right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(trees, node_off)])
    leaf_of = np.concatenate([np.where(t.leaf_index >= 0, t.leaf_index + o, -1)
                              for t, o in zip(trees, leaf_off)])
    has_stats = trees[0].centroid is not None
    return PackedForest(
        feature=np.concatenate([t.feature for t in trees]).astype(np.int32),
        threshold=np.concatenate([t.threshold for t in trees]).astype(np.float64),
        left=left.astype(np.int32),
        right=right.astype(np.int32),
        leaf_of=leaf_of.astype(np.int32),
        roots=node_off[:-1].astype(np.int32),
        leaf_offsets=leaf_off.astype(np.int64),
        leaf_count=np.concatenate([t.leaf_count for t in trees]).astype(np.int64),
        leaf_depth=np.concatenate([t.leaf_depth for t in trees]).astype(np.int32),
        train_freq=np.concatenate([t.train_freq for t in trees]).astype(np.float64),
        centroid=np.ascontiguousarray(np.vstack([t.centroid for t in trees])) if has_stats else None,
        sigma=np.ascontiguousarray(np.vstack([t.sigma for t in trees])) if has_stats else None,
    )


def tree_rng(seed, index):
    """Independent random stream for tree ``index`` of a forest seeded with ``seed``."""
    return np.random.default_rng([int(seed), int(index)])


@dataclass
class Forest:
    config: ForestConfig
    n_features: int
    trees: list
    kind: str = "diff-rf"
    packed: PackedForest = field(init=False, repr=False)

    def __post_init__(self):
        self.packed = pack(self.trees)
        # re-point per-tree leaf arrays at the packed storage
        offs = self.packed.leaf_offsets
        for k, tree in enumerate(self.trees):
            lo, hi = offs[k], offs[k + 1]
            tree.leaf_count = self.packed.leaf_count[lo:hi]
            tree.leaf_depth = self.packed.leaf_depth[lo:hi]
            if self.packed.centroid is not None:
                tree.centroid = self.packed.centroid[lo:hi]
                tree.sigma = self.packed.sigma[lo:hi]

    @property
    def max_height(self):
        return self.config.max_height

    def __len__(self):
        return len(self.trees)


def build_forest(train, config, *, threads=None, backend="auto"):
    """Build ``config.tree_count`` trees, each on its own sample drawn without replacement.

    Tree ``i`` draws its sample and split randomness from ``tree_rng(seed, i)``,
    so the result does not depend on ``threads``.
    """
    X = as_matrix(train, name="train")
    psi = int(config.sample_size)
    if psi > len(X):
        raise ConfigurationError(f"sample_size {psi} exceeds training rows {len(X)}")
    h_max = config.max_height

    def one(i):
        rng = tree_rng(config.seed, i)
        idx = rng.choice(len(X), psi, replace=False)
        return build_tree(X[idx], psi, h_max, rng, backend=backend)

    trees = _map_trees(one, config.tree_count, threads)
    return Forest(config=config, n_features=X.shape[1], trees=trees)


def _map_trees(fn, count, threads):
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or count == 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def leaf_population_stats(forest):
    """Mean leaf size over all leaves of the forest and per-depth leaf histogram."""
    packed = forest.packed
    depths, freq = np.unique(packed.leaf_depth, return_counts=True)
    return {
        "mean_leaf_size": float(packed.leaf_count.mean()),
        "n_leaves": int(packed.n_leaves),
        "depth_histogram": {int(d): int(c) for d, c in zip(depths, freq)},
    }
