"""Synthetic datasets, drift perturbations, CSV I/O and train/test splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, InputError

NORMAL = 0
ANOMALY = 1

RED_MEAN = (3.0, 3.0)
RED_COV = (0.25, 0.25)
GREEN_MEAN = (0.0, 0.0)
GREEN_COV = (0.5, 0.5)


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.labels) != len(self.features):
            raise InputError("label count differs from row count")
        if self.groups is not None:
            self.groups = np.asarray(self.groups, dtype=object)

    def __len__(self):
        return len(self.labels)

    @property
    def normals(self):
        return self.features[self.labels == NORMAL]

    @property
    def anomalies(self):
        return self.features[self.labels == ANOMALY]

    def subset(self, mask):
        return LabeledDataset(self.features[mask], self.labels[mask],
                              None if self.groups is None else self.groups[mask])

    @classmethod
    def concat(cls, parts):
        groups = None
        if all(p.groups is not None for p in parts):
            groups = np.concatenate([p.groups for p in parts])
        return cls(np.vstack([p.features for p in parts]),
                   np.concatenate([p.labels for p in parts]), groups)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def gen_torus(n, r_inner=1.5, r_outer=4.0, seed=None):
    """``n`` points uniform over the annulus ``r_inner <= |p| <= r_outer``."""
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    if not 0 < r_inner < r_outer:
        raise ConfigurationError("radii must satisfy 0 < r_inner < r_outer")
    rng = _rng(seed)
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    u = rng.random(n)
    r = np.sqrt(u * (r_outer**2 - r_inner**2) + r_inner**2)
    # guard the closed bounds against rounding in sqrt
    r = np.clip(r, r_inner, r_outer)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def gen_gaussian_cluster(n, mean, diag_cov, seed=None):
    mean = np.asarray(mean, dtype=np.float64)
    diag_cov = np.asarray(diag_cov, dtype=np.float64)
    if mean.shape != diag_cov.shape:
        raise ConfigurationError("mean and diag_cov must have the same length")
    if (diag_cov <= 0).any():
        raise ConfigurationError("diag_cov components must be > 0")
    return _rng(seed).normal(mean, np.sqrt(diag_cov), size=(int(n), mean.size))


def _labeled(X, label, group):
    return LabeledDataset(X, np.full(len(X), label), np.full(len(X), group, dtype=object))


def gen_donut(seed=None, n_train=1000, n_test=1000, n_red=500, n_green=500):
    """The 2-d torus with a red cluster on its rim and a green one in its hole.

    Returns ``(train, test)``; train holds normals only.
    """
    rng = _rng(seed)
    train = _labeled(gen_torus(n_train, seed=rng), NORMAL, "train-normal")
    test = LabeledDataset.concat([
        _labeled(gen_torus(n_test, seed=rng), NORMAL, "test-normal"),
        _labeled(gen_gaussian_cluster(n_red, RED_MEAN, RED_COV, rng), ANOMALY, "red"),
        _labeled(gen_gaussian_cluster(n_green, GREEN_MEAN, GREEN_COV, rng), ANOMALY, "green"),
    ])
    return train, test


def gen_donut25(seed=None, noise_var=0.2, n_train=2000, n_test=1000, n_red=750, n_green=750):
    """Five-dimensional donut: torus plus clusters in dims 0-1, N(0, noise_var) in dims 2-4."""
    rng = _rng(seed)
    train, test = gen_donut(rng, n_train, n_test, n_red, n_green)

    def widen(ds):
        noise = rng.normal(0.0, math.sqrt(noise_var), size=(len(ds), 3))
        return LabeledDataset(np.hstack([ds.features, noise]), ds.labels, ds.groups)

    return widen(train), widen(test)


def apply_drift(data, kind, magnitude):
    """Translate by ``magnitude`` times each dimension's range, or scale about the centroid."""
    X = np.asarray(data, dtype=np.float64)
    if magnitude < -1:
        raise ConfigurationError("magnitude must be >= -1")
    if kind == "translation":
        span = X.max(axis=0) - X.min(axis=0)
        return X + magnitude * span
    if kind == "homothety":
        c = X.mean(axis=0)
        return c + (1.0 + magnitude) * (X - c)
    raise ConfigurationError(f"unknown drift kind {kind!r}")


def split_train_test(normals, fraction=0.8, seed=None):
    """Random disjoint split of normal rows into (train, test)."""
    if not 0 < fraction < 1:
        raise ConfigurationError("fraction must lie in (0, 1)")
    X = np.asarray(normals, dtype=np.float64)
    perm = _rng(seed).permutation(len(X))
    k = int(round(fraction * len(X)))
    return X[perm[:k]], X[perm[k:]]


def split_dataset(ds, fraction=0.8, seed=None):
    """80/20 split of the normals; every anomaly goes to the test side."""
    normal_idx = np.flatnonzero(ds.labels == NORMAL)
    perm = _rng(seed).permutation(normal_idx)
    k = int(round(fraction * len(normal_idx)))
    test_mask = np.ones(len(ds), dtype=bool)
    test_mask[perm[:k]] = False
    train_mask = np.zeros(len(ds), dtype=bool)
    train_mask[perm[:k]] = True
    return ds.subset(train_mask), ds.subset(test_mask)


# ---------------------------------------------------------------------------
# CSV


def save_csv(path, ds):
    d = ds.features.shape[1]
    header = [f"x{j}" for j in range(d)]
    if ds.groups is not None:
        header.append("group")
    header.append("label")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(ds)):
            row = [repr(float(v)) for v in ds.features[i]]
            if ds.groups is not None:
                row.append(ds.groups[i])
            row.append(int(ds.labels[i]))
            w.writerow(row)


def load_csv(path, require_labels=True):
    """Read a header-first CSV whose last column is the 0/1 label.

    A non-numeric ``group`` column just before the label is kept as group tags.
    With ``require_labels=False`` a file without a label column is accepted.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    has_label = header[-1].lower() == "label" or require_labels
    has_group = "group" in header
    n_feat = len(header) - int(has_label) - int(has_group)
    if n_feat < 1:
        raise InputError(f"{path}: no feature columns")
    feats, labels, groups = [], [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise InputError(f"{path}: line {line_no}: expected {len(header)} fields, got {len(row)}")
        vals = []
        for col in range(n_feat):
            try:
                v = float(row[col])
            except ValueError:
                raise InputError(f"{path}: line {line_no}, column {col + 1}: not a number: {row[col]!r}") from None
            if not math.isfinite(v):
                raise InputError(f"{path}: row {line_no - 1} (line {line_no}), column {col + 1}: non-finite value {row[col]!r}")
            vals.append(v)
        feats.append(vals)
        if has_group:
            groups.append(row[header.index("group")])
        if has_label:
            lab = row[-1].strip()
            if lab not in ("0", "1"):
                raise InputError(f"{path}: line {line_no}: label {lab!r} not in {{0, 1}}")
            labels.append(int(lab))
    X = np.array(feats, dtype=np.float64).reshape(len(feats), n_feat)
    y = np.array(labels if has_label else [NORMAL] * len(feats), dtype=np.int64)
    return LabeledDataset(X, y, np.array(groups, dtype=object) if has_group else None)
