"""Semi-supervised selection of the distance scale ``alpha``.

Normal data is cut into folds of about ``sample_size`` rows. For each held-out
fold a forest is grown on the remaining rows, and the upper tail of the
held-out point-wise scores is compared with the in-sample tail. The ``alpha``
whose tails agree best (smallest mean tail distance) wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError
from .forest import ForestConfig, as_matrix, build_forest
from .scoring import leaf_distances

DEFAULT_GRID = (1e-12, 1e-9, 1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0)
TAIL_PERCENTILES = (95, 96, 97, 98, 99)


def nearest_rank(sorted_values, pct):
    """The ``ceil(pct/100 * n)``-th smallest value (1-based)."""
    n = len(sorted_values)
    rank = max(1, (pct * n + 99) // 100)
    return sorted_values[rank - 1]


def distribution_distance(test_scores, train_scores):
    """Sum over the 95th..99th train percentiles of |% of test above it - expected %|.

    Zero when the test tail matches the train tail; at most 485.
    """
    test = np.asarray(test_scores, dtype=np.float64).ravel()
    train = np.sort(np.asarray(train_scores, dtype=np.float64).ravel())
    if test.size == 0 or train.size == 0:
        raise ValueError("score vectors must be non-empty")
    total = 0.0
    for i in TAIL_PERCENTILES:
        q = nearest_rank(train, i)
        pct = 100.0 * np.count_nonzero(test > q) / test.size
        total += abs(pct - (100 - i))
    return total


def partition(X, sample_size, rng):
    """Shuffle row indices and cut them into ``len(X) // sample_size`` near-equal folds."""
    n = len(X)
    if n <= sample_size:
        raise ConfigurationError(f"cannot partition {n} rows into folds of {sample_size}")
    k = n // sample_size
    return np.array_split(rng.permutation(n), k)


@dataclass
class AlphaReport:
    grid: list
    R: np.ndarray
    selected: float
    trajectory: np.ndarray = field(repr=False)

    @property
    def step_differences(self):
        """Euclidean norm of R's change between consecutive iterations."""
        return np.linalg.norm(np.diff(self.trajectory, axis=0), axis=1)

    def convergence_slope(self):
        """Log-log regression slope of the step differences against iteration."""
        steps = self.step_differences
        k = np.arange(2, len(steps) + 2)
        keep = steps > 0
        if keep.sum() < 2:
            return float("nan")
        return float(np.polyfit(np.log(k[keep]), np.log(steps[keep]), 1)[0])

    def to_dict(self):
        return {"grid": list(self.grid), "R": self.R.tolist(), "selected": self.selected,
                "trajectory": self.trajectory.tolist()}


def tune_alpha(X, tree_count=128, sample_size=256, iterations=12, grid=DEFAULT_GRID, *,
               seed=0, height_factor=1.0, threads=None, backend="auto"):
    """Pick ``alpha`` from ``grid`` by cross-fold tail agreement of point-wise scores.

    Tree structure does not depend on ``alpha``, so each fold's forest is grown
    once and every candidate is evaluated on the same leaf distances.
    """
    X = as_matrix(X, name="X")
    grid = [float(a) for a in grid]
    if not grid:
        raise ConfigurationError("alpha grid is empty")
    if any(not a > 0 for a in grid):
        raise ConfigurationError("alpha candidates must be positive")
    if iterations < 1:
        raise ConfigurationError("iterations must be >= 1")
    if len(X) // sample_size < 2:
        raise ConfigurationError(
            f"need at least two folds: {len(X)} rows with sample_size {sample_size}")
    alphas = np.asarray(grid)
    totals = np.zeros(len(grid))
    trajectory = np.empty((iterations, len(grid)))
    for k in range(iterations):
        rng = np.random.default_rng([int(seed), k])
        folds = partition(X, sample_size, rng)
        for i, held in enumerate(folds):
            rest = np.concatenate([f for j, f in enumerate(folds) if j != i])
            train = X[rest]
            cfg = ForestConfig(tree_count=tree_count, sample_size=min(sample_size, len(train)),
                               height_factor=height_factor,
                               seed=int(rng.integers(0, 2**63)))
            forest = build_forest(train, cfg, threads=threads, backend=backend)
            d_held = leaf_distances(forest, X[held], threads=threads, backend=backend)
            d_train = leaf_distances(forest, train, threads=threads, backend=backend)
            for a_idx, a in enumerate(alphas):
                s_held = -np.exp2(-a * d_held).mean(axis=1)
                s_train = -np.exp2(-a * d_train).mean(axis=1)
                totals[a_idx] += distribution_distance(s_held, s_train)
        trajectory[k] = totals / (k + 1)
    R = totals / iterations
    best = int(np.flatnonzero(R == R.min())[np.argmin(alphas[R == R.min()])])
    return AlphaReport(grid=grid, R=R, selected=grid[best], trajectory=trajectory)
