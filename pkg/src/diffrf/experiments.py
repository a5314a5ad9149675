"""Scripted desk-scale experiments: donut, drift, flood, plateaus, buckets, donut25.

Each driver returns a :class:`Report`, a flat ordered mapping of dotted keys to
numbers or strings that renders as ``key = value`` lines and parses back
losslessly. Drivers that produce scores also attach score dump rows
``(instance_id, group, score_kind, score)``.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import datagen
from .datagen import ANOMALY, NORMAL
from .exceptions import ConfigurationError, InputError
from .forest import ForestConfig, build_forest, leaf_population_stats
from .iforest import build_iforest, iforest_score
from .metrics import evaluate, ks_critical_value, ks_two_sample, roc_auc
from .scoring import COLLECTIVE, FREQUENCY, IFOREST, POINTWISE, batch_scores
from .tuning import tune_alpha

DEFAULT_SEEDS = (0, 1, 2, 3, 4)
DRIFT_LEVELS = (0.01, 0.005, 0.001)


@dataclass
class Report:
    values: dict = field(default_factory=dict)
    dumps: list = field(default_factory=list, repr=False)

    def __setitem__(self, key, value):
        if isinstance(value, (np.floating, np.integer)):
            value = value.item()
        self.values[key] = value

    def __getitem__(self, key):
        return self.values[key]

    def __contains__(self, key):
        return key in self.values

    def update(self, other, prefix=""):
        for k, v in other.values.items():
            self[prefix + k] = v
        self.dumps.extend(other.dumps)

    def to_text(self):
        lines = []
        for k, v in self.values.items():
            lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rep = cls()
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            key, sep, raw = line.partition(" = ")
            if not sep:
                raise InputError(f"report line {line_no}: expected 'key = value'")
            rep.values[key] = _parse_value(raw)
        return rep

    def write_scores(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["instance_id", "group", "score_kind", "score"])
            for row in self.dumps:
                w.writerow([row[0], row[1], row[2], repr(float(row[3]))])


def _parse_value(raw):
    for conv in (int, float):
        try:
            return conv(raw)
        except ValueError:
            pass
    if raw in ("True", "False"):
        return raw == "True"
    return raw


def _dump(report, tag, groups, kind, scores):
    for i, (g, s) in enumerate(zip(groups, scores)):
        report.dumps.append((f"{tag}:{i}", g, kind, s))


def _mean_over_seeds(report, seeds, keys):
    for key in keys:
        vals = [report[f"seed{s}.{key}"] for s in seeds]
        report[f"mean.{key}"] = float(np.mean(vals))


def _check_seeds(seeds):
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ConfigurationError("at least one seed is required")
    return seeds


def _alpha_for(train, alpha, seed, tune_trees, tune_sample_size, tune_iterations, threads):
    if alpha not in (None, "auto"):
        return float(alpha), None
    rep = tune_alpha(train, tune_trees, tune_sample_size, tune_iterations, seed=seed,
                     threads=threads)
    return rep.selected, rep


# ---------------------------------------------------------------------------
# donut


def donut_seed(seed, *, tree_count=128, sample_size=512, alpha="auto", n_red=500, n_green=500,
               tune_trees=256, tune_sample_size=256, tune_iterations=12, threads=None,
               dump=False):
    """IF versus DiFF-RF point-wise, frequency-only and collective on one donut draw."""
    rep = Report()
    t0 = time.perf_counter()
    train, test = datagen.gen_donut(seed, n_red=n_red, n_green=n_green)
    a, _ = _alpha_for(train.features, alpha, seed, tune_trees, tune_sample_size,
                      tune_iterations, threads)
    rep["alpha"] = a
    iso = build_iforest(train.features, tree_count, sample_size, seed, threads=threads)
    forest = build_forest(train.features, ForestConfig(tree_count, sample_size, a, seed=seed),
                          threads=threads)
    scores = {IFOREST: iforest_score(iso, test.features, threads=threads).scores}
    for kind, sv in batch_scores(forest, test.features, threads=threads).items():
        scores[kind] = sv.scores
    normal = test.labels == NORMAL
    for kind in (IFOREST, POINTWISE, FREQUENCY, COLLECTIVE):
        ev = evaluate(scores[kind], test.labels, with_roc=False)
        for m, v in ev.items():
            rep[f"{m}.{kind}"] = v
        for grp in ("red", "green"):
            stat, p = ks_two_sample(scores[kind][normal], scores[kind][test.groups == grp])
            rep[f"ks.{kind}.{grp}"] = stat
        if dump:
            _dump(rep, f"donut{seed}", test.groups, kind, scores[kind])
    rep["seconds"] = time.perf_counter() - t0
    return rep


def run_donut(seeds=DEFAULT_SEEDS, **kwargs):
    seeds = _check_seeds(seeds)
    rep = Report()
    for s in seeds:
        rep.update(donut_seed(s, **kwargs), prefix=f"seed{s}.")
    kinds = (IFOREST, POINTWISE, FREQUENCY, COLLECTIVE)
    keys = [f"{m}.{k}" for m in ("auc", "ap", "eer") for k in kinds]
    keys += [f"ks.{k}.{g}" for k in kinds for g in ("red", "green")]
    _mean_over_seeds(rep, seeds, keys + ["seconds"])
    rep["ordered_all_seeds"] = all(
        rep[f"seed{s}.auc.collective"] > rep[f"seed{s}.auc.pointwise"] > rep[f"seed{s}.auc.iforest"]
        for s in seeds)
    return rep


# ---------------------------------------------------------------------------
# drift


def drift_seed(seed, kind="translation", magnitude=0.04, *, tree_count=128, sample_size=256,
               alpha=10.0, n=1000, threads=None, dump=False):
    """KS between scores of an undrifted normal batch and its drifted copy.

    Each batch is its own collective context.
    """
    rep = Report()
    rng = np.random.default_rng(seed)
    train = datagen.gen_torus(n, seed=rng)
    batch = datagen.gen_torus(n, seed=rng)
    moved = datagen.apply_drift(batch, kind, magnitude)
    a, _ = _alpha_for(train, alpha, seed, 256, 256, 12, threads)
    rep["alpha"] = a
    forest = build_forest(train, ForestConfig(tree_count, sample_size, a, seed=seed),
                          threads=threads)
    before = batch_scores(forest, batch, threads=threads)
    after = batch_scores(forest, moved, threads=threads)
    for k in (POINTWISE, COLLECTIVE):
        stat, p = ks_two_sample(before[k].scores, after[k].scores)
        rep[f"{k}.statistic"] = stat
        rep[f"{k}.p_value"] = p
        if dump:
            _dump(rep, f"drift{seed}:before", ["before"] * n, k, before[k].scores)
            _dump(rep, f"drift{seed}:after", ["after"] * n, k, after[k].scores)
    return rep


def run_drift(kind="translation", magnitude=0.04, seeds=DEFAULT_SEEDS, **kwargs):
    seeds = _check_seeds(seeds)
    rep = Report()
    rep["kind"] = kind
    rep["magnitude"] = float(magnitude)
    n = kwargs.get("n", 1000)
    for level in DRIFT_LEVELS:
        rep[f"critical.{level}"] = ks_critical_value(n, n, level)
    for s in seeds:
        rep.update(drift_seed(s, kind, magnitude, **kwargs), prefix=f"seed{s}.")
    _mean_over_seeds(rep, seeds, [f"{k}.{m}" for k in (POINTWISE, COLLECTIVE)
                                  for m in ("statistic", "p_value")])
    return rep


# ---------------------------------------------------------------------------
# flood

FLOOD_SETUPS = ("no_flood", "flood_legit", "flood_attack")


def flood_data(seed, *, n_train=1000, n_normal=1000, n_attack=10, n_flood=50,
               attack_mean=datagen.RED_MEAN, attack_cov=datagen.RED_COV,
               flood_mean=(3.6, 3.6), flood_cov=(0.09, 0.09)):
    """Train normals plus test normals, attack points and flood points (unlabelled flood)."""
    rng = np.random.default_rng(seed)
    train = datagen.gen_torus(n_train, seed=rng)
    normal = datagen.gen_torus(n_normal, seed=rng)
    attack = datagen.gen_gaussian_cluster(n_attack, attack_mean, attack_cov, rng)
    flood = datagen.gen_gaussian_cluster(n_flood, flood_mean, flood_cov, rng)
    return train, normal, attack, flood


def flood_seed(seed, *, tree_count=128, sample_size=256, alpha=10.0, threads=None, dump=False,
               **geometry):
    rep = Report()
    train, normal, attack, flood = flood_data(seed, **geometry)
    a, _ = _alpha_for(train, alpha, seed, 256, 256, 12, threads)
    rep["alpha"] = a
    forest = build_forest(train, ForestConfig(tree_count, sample_size, a, seed=seed),
                          threads=threads)
    n0, n1, nf = len(normal), len(attack), len(flood)
    for setup in FLOOD_SETUPS:
        parts = [normal, attack] if setup == "no_flood" else [normal, attack, flood]
        X = np.vstack(parts)
        y = np.r_[np.full(n0, NORMAL), np.full(n1, ANOMALY)]
        groups = ["normal"] * n0 + ["attack"] * n1
        if setup != "no_flood":
            y = np.r_[y, np.full(nf, ANOMALY if setup == "flood_attack" else NORMAL)]
            groups += ["flood"] * nf
        scores = batch_scores(forest, X, threads=threads)
        for k in (POINTWISE, COLLECTIVE):
            ev = evaluate(scores[k].scores, y, with_roc=False)
            rep[f"{setup}.{k}.auc"] = ev["auc"]
            rep[f"{setup}.{k}.eer"] = ev["eer"]
            if dump:
                _dump(rep, f"flood{seed}:{setup}", groups, k, scores[k].scores)
    return rep


def run_flood(seeds=DEFAULT_SEEDS, **kwargs):
    seeds = _check_seeds(seeds)
    rep = Report()
    for s in seeds:
        rep.update(flood_seed(s, **kwargs), prefix=f"seed{s}.")
    _mean_over_seeds(rep, seeds, [f"{st}.{k}.{m}" for st in FLOOD_SETUPS
                                  for k in (POINTWISE, COLLECTIVE) for m in ("auc", "eer")])
    return rep


def format_flood_table(rep):
    """Table layout: one row per setup, AUC and EER per detector."""
    head = f"{'setup':<14}{'pw AUC':>9}{'pw EER':>9}{'co AUC':>9}{'co EER':>9}"
    rows = [head]
    for st in FLOOD_SETUPS:
        vals = [rep[f"mean.{st}.{k}.{m}"] for k in (POINTWISE, COLLECTIVE) for m in ("auc", "eer")]
        rows.append(f"{st:<14}" + "".join(f"{v:9.3f}" for v in vals))
    return "\n".join(rows)


# ---------------------------------------------------------------------------
# hyper-parameter plateaus


def run_plateaus(seeds=DEFAULT_SEEDS, tree_counts=(32, 64, 128, 256, 512),
                 sample_sizes=(100, 250, 500, 1000), fixed_sample_size=128, fixed_trees=128,
                 alpha=10.0, n_train=2000, threads=None):
    """Collective AUC on the donut across tree counts and across sample sizes.

    Trains on ``n_train`` normals so every sample size in the sweep is a strict subsample.
    """
    seeds = _check_seeds(seeds)
    rep = Report()
    data = {s: datagen.gen_donut(s, n_train=n_train) for s in seeds}
    grid = [("trees", t, fixed_sample_size) for t in tree_counts]
    grid += [("sample_size", fixed_trees, psi) for psi in sample_sizes]
    for axis, t, psi in grid:
        value = t if axis == "trees" else psi
        aucs = []
        for s in seeds:
            train, test = data[s]
            forest = build_forest(train.features, ForestConfig(t, psi, alpha, seed=s),
                                  threads=threads)
            sc = batch_scores(forest, test.features, threads=threads)[COLLECTIVE].scores
            aucs.append(roc_auc(sc, test.labels))
        rep[f"{axis}.{value}.auc"] = float(np.mean(aucs))
    for axis, values in (("trees", tree_counts), ("sample_size", sample_sizes)):
        aucs = [rep[f"{axis}.{v}.auc"] for v in values]
        rep[f"{axis}.spread"] = float(max(aucs) - min(aucs))
    return rep


# ---------------------------------------------------------------------------
# bucket growth


def run_buckets(seeds=DEFAULT_SEEDS, exponents=range(7, 13), height_factor=1.2,
                tree_count=128, variance=3.0, dim=2, threads=None):
    """Mean training-leaf size as the sample size doubles, on N(0, variance I) data."""
    seeds = _check_seeds(seeds)
    rep = Report()
    exponents = list(exponents)
    n = 2 ** max(exponents)
    prev = None
    for e in exponents:
        psi = 2**e
        sizes, depths = [], []
        for s in seeds:
            X = np.random.default_rng(s).normal(0.0, np.sqrt(variance), size=(n, dim))
            forest = build_forest(X, ForestConfig(tree_count, psi, 1.0, height_factor, seed=s),
                                  threads=threads)
            st = leaf_population_stats(forest)
            sizes.append(st["mean_leaf_size"])
            depths.append(float(np.mean(forest.packed.leaf_depth)))
        size = float(np.mean(sizes))
        rep[f"psi.{psi}.mean_leaf_size"] = size
        rep[f"psi.{psi}.mean_leaf_depth"] = float(np.mean(depths))
        if prev is not None:
            rep[f"psi.{psi}.increment"] = size - prev
        prev = size
    return rep


# ---------------------------------------------------------------------------
# five-dimensional donut


def donut25_seed(seed, *, tree_count=128, sample_size=None, alpha="auto", tune_trees=256,
                 tune_sample_size=256, tune_iterations=12, threads=None, dump=False):
    rep = Report()
    train, test = datagen.gen_donut25(seed)
    psi = sample_size or int(np.ceil(0.25 * len(train)))
    a, _ = _alpha_for(train.features, alpha, seed, tune_trees, tune_sample_size,
                      tune_iterations, threads)
    rep["alpha"] = a
    forest = build_forest(train.features, ForestConfig(tree_count, psi, a, seed=seed),
                          threads=threads)
    for kind, sv in batch_scores(forest, test.features, threads=threads).items():
        ev = evaluate(sv.scores, test.labels, with_roc=False)
        for m, v in ev.items():
            rep[f"{m}.{kind}"] = v
        if dump:
            _dump(rep, f"donut25_{seed}", test.groups, kind, sv.scores)
    return rep


def run_donut25(seeds=DEFAULT_SEEDS, **kwargs):
    seeds = _check_seeds(seeds)
    rep = Report()
    for s in seeds:
        rep.update(donut25_seed(s, **kwargs), prefix=f"seed{s}.")
    _mean_over_seeds(rep, seeds, [f"{m}.{k}" for m in ("auc", "ap", "eer")
                                  for k in (POINTWISE, FREQUENCY, COLLECTIVE)] + ["alpha"])
    return rep


EXPERIMENTS = {
    "donut": run_donut,
    "drift": run_drift,
    "flood": run_flood,
    "plateaus": run_plateaus,
    "buckets": run_buckets,
    "donut25": run_donut25,
}


def run_experiment(name, **kwargs):
    try:
        fn = EXPERIMENTS[name]
    except KeyError:
        raise ConfigurationError(f"unknown experiment {name!r}; choose from "
                                 f"{', '.join(EXPERIMENTS)}") from None
    return fn(**kwargs)


__all__ = ["Report", "run_experiment", "EXPERIMENTS", "FLOOD_SETUPS", "DEFAULT_SEEDS"]
