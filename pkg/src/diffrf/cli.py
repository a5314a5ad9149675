"""Command-line interface: ``diffrf gen|train|tune|score|eval|experiment|inspect``.

Output is ``key = value`` lines (or CSV files) so it can be parsed by scripts.
Every flag can also be set through an environment variable named
``DIFFRF_<FLAG>`` (e.g. ``DIFFRF_TREES=256``); an explicit flag wins.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 model file error.
"""

from __future__ import annotations

import csv
import math
import os
import sys
import time

import click
import numpy as np

from . import datagen, experiments, metrics
from .exceptions import ConfigurationError, InputError, ModelFileError, UndefinedMetricError
from .forest import ForestConfig, build_forest, leaf_population_stats
from .iforest import build_iforest, iforest_score
from .persistence import fingerprint, load_model, save_model
from .scoring import COLLECTIVE, FREQUENCY, POINTWISE, score
from .tuning import DEFAULT_GRID, tune_alpha

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3
MAX_AUTO_SAMPLE = 50_000
ENV_PREFIX = "DIFFRF"


def auto_sample_size(n):
    """25 % of the training rows, capped at 50 000."""
    return min(math.ceil(0.25 * n), MAX_AUTO_SAMPLE)


def _env(name):
    return f"{ENV_PREFIX}_{name}"


class AutoOr(click.ParamType):
    """``auto`` or a number of the given type."""

    def __init__(self, kind):
        self.kind = kind
        self.name = f"auto|{kind.__name__}"

    def convert(self, value, param, ctx):
        if value is None or (isinstance(value, str) and value.lower() == "auto"):
            return None
        if isinstance(value, self.kind):
            return value
        try:
            return self.kind(value)
        except (TypeError, ValueError):
            self.fail(f"{value!r} is neither 'auto' nor a valid {self.kind.__name__}", param, ctx)


def _emit(pairs):
    for k, v in pairs:
        click.echo(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")


def _load_features(path, require_labels=False):
    return datagen.load_csv(path, require_labels=require_labels)


def _seeds(text):
    try:
        return [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise click.BadParameter(f"seeds must be comma-separated integers, got {text!r}") from None


trees_opt = click.option("--trees", type=int, default=128, show_default=True, envvar=_env("TREES"),
                         help="Number of trees t.")
sample_opt = click.option("--sample-size", type=AutoOr(int), default="auto", show_default=True,
                          envvar=_env("SAMPLE_SIZE"),
                          help="Rows per tree psi; auto = min(ceil(0.25 n), 50000).")
alpha_opt = click.option("--alpha", type=AutoOr(float), default="auto", show_default=True,
                         envvar=_env("ALPHA"), help="Distance scale; auto runs the tuner.")
height_opt = click.option("--height-factor", type=float, default=1.0, show_default=True,
                          envvar=_env("HEIGHT_FACTOR"),
                          help="Max depth = ceil(factor * log2 psi).")
seed_opt = click.option("--seed", type=int, default=0, show_default=True, envvar=_env("SEED"))
threads_opt = click.option("--threads", type=int, default=None, envvar=_env("THREADS"),
                           help="Worker threads (default: all cores). Never changes results.")
out_opt = click.option("--out", type=click.Path(), default=None, envvar=_env("OUT"))


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Distance and visit-frequency random forests for anomaly detection."""


@cli.command()
@click.argument("dataset", type=click.Choice(["donut", "donut25"]))
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True,
              envvar=_env("OUT"), help="Directory for train.csv and test.csv.")
@seed_opt
def gen(dataset, out, seed):
    """Write train.csv and test.csv for a synthetic dataset."""
    make = datagen.gen_donut if dataset == "donut" else datagen.gen_donut25
    train, test = make(seed)
    os.makedirs(out, exist_ok=True)
    paths = (os.path.join(out, "train.csv"), os.path.join(out, "test.csv"))
    for path, ds in zip(paths, (train, test)):
        datagen.save_csv(path, ds)
    _emit([("train", paths[0]), ("train_rows", len(train)), ("test", paths[1]),
           ("test_rows", len(test)), ("test_anomalies", int(test.labels.sum()))])


def _tune_sample_size(psi, n):
    return max(1, min(psi, n // 2))


@cli.command()
@click.argument("train_csv", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True, envvar=_env("OUT"),
              help="Model file to write.")
@trees_opt
@sample_opt
@alpha_opt
@height_opt
@seed_opt
@threads_opt
@click.option("--kind", type=click.Choice(["diff-rf", "iforest"]), default="diff-rf",
              show_default=True, envvar=_env("KIND"))
@click.option("--iterations", type=int, default=12, show_default=True,
              envvar=_env("ITERATIONS"), help="Tuner iterations when --alpha auto.")
def train(train_csv, out, trees, sample_size, alpha, height_factor, seed, threads, kind,
          iterations):
    """Build a forest on the normal rows of TRAIN_CSV and save it."""
    ds = _load_features(train_csv)
    X = ds.normals if ds.labels.any() else ds.features
    n = len(X)
    psi = auto_sample_size(n) if sample_size is None else sample_size
    if psi > n:
        raise ConfigurationError(f"sample size {psi} exceeds the {n} training rows")
    meta = {"sample_size_source": "auto" if sample_size is None else "fixed"}
    out_pairs = []
    t0 = time.perf_counter()
    if kind == "iforest":
        model = build_iforest(X, trees, psi, seed, threads=threads)
    else:
        if alpha is None:
            tpsi = _tune_sample_size(psi, n)
            rep = tune_alpha(X, trees, tpsi, iterations, seed=seed, height_factor=height_factor,
                             threads=threads)
            alpha = rep.selected
            meta.update(alpha_source="auto", tune_sample_size=tpsi, tune_iterations=iterations,
                        tune_grid=list(rep.grid), tune_R=rep.R.tolist())
            out_pairs.append(("tune_seconds", time.perf_counter() - t0))
        else:
            meta["alpha_source"] = "fixed"
        cfg = ForestConfig(trees, psi, float(alpha), height_factor, seed)
        model = build_forest(X, cfg, threads=threads)
    elapsed = time.perf_counter() - t0
    save_model(model, out, fingerprint=fingerprint(X), metadata=meta)
    st = leaf_population_stats(model)
    _emit([("model", out), ("kind", model.kind), ("trees", model.config.tree_count),
           ("sample_size", model.config.sample_size), ("alpha", model.config.alpha),
           ("alpha_source", meta.get("alpha_source", "n/a")),
           ("height_factor", model.config.height_factor), ("seed", model.config.seed),
           ("train_rows", n), ("n_leaves", st["n_leaves"]),
           ("mean_leaf_size", st["mean_leaf_size"])] + out_pairs + [("build_seconds", elapsed)])


@cli.command()
@click.argument("train_csv", type=click.Path(dir_okay=False))
@trees_opt
@sample_opt
@height_opt
@seed_opt
@threads_opt
@click.option("--iterations", type=int, default=12, show_default=True, envvar=_env("ITERATIONS"))
@click.option("--grid", default=",".join(repr(a) for a in DEFAULT_GRID), envvar=_env("GRID"),
              help="Comma-separated candidate alphas.")
def tune(train_csv, trees, sample_size, height_factor, seed, threads, iterations, grid):
    """Select alpha by cross-fold agreement of score tails."""
    ds = _load_features(train_csv)
    X = ds.normals if ds.labels.any() else ds.features
    try:
        candidates = [float(a) for a in grid.split(",") if a.strip()]
    except ValueError:
        raise click.BadParameter(f"grid must be comma-separated numbers, got {grid!r}") from None
    psi = auto_sample_size(len(X)) if sample_size is None else sample_size
    t0 = time.perf_counter()
    rep = tune_alpha(X, trees, psi, iterations, candidates, seed=seed,
                     height_factor=height_factor, threads=threads)
    pairs = [("selected", rep.selected), ("sample_size", psi), ("iterations", iterations)]
    pairs += [(f"R[{a!r}]", float(r)) for a, r in zip(rep.grid, rep.R)]
    if iterations >= 3:
        pairs.append(("step_slope", rep.convergence_slope()))
    pairs.append(("seconds", time.perf_counter() - t0))
    _emit(pairs)


@cli.command("score")
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.argument("data_csv", type=click.Path(dir_okay=False))
@click.option("--mode", type=click.Choice([POINTWISE, COLLECTIVE, FREQUENCY]), default=POINTWISE,
              show_default=True, envvar=_env("MODE"),
              help="collective and frequency use the whole file as the batch context.")
@out_opt
@threads_opt
def score_cmd(model_path, data_csv, mode, out, threads):
    """Score every row of DATA_CSV; writes instance_id,score."""
    mf = load_model(model_path)
    ds = _load_features(data_csv)
    if mf.kind == "iforest":
        scores = iforest_score(mf.model, ds.features, threads=threads).scores
    else:
        scores = score(mf.model, ds.features, mode, threads=threads).scores
    fh = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance_id", "score"])
        for i, s in enumerate(scores):
            w.writerow([i, repr(float(s))])
    finally:
        if out:
            fh.close()
    if out:
        _emit([("scores", out), ("rows", len(scores)), ("mode", mode if mf.kind != "iforest"
                                                          else "iforest")])


def read_scores(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]][-1] != "score":
        raise InputError(f"{path}: expected a header ending in 'score'")
    out = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            v = float(row[-1])
        except ValueError:
            raise InputError(f"{path}: line {line_no}: score {row[-1]!r} is not a number") from None
        if not math.isfinite(v):
            raise InputError(f"{path}: line {line_no}: non-finite score")
        out.append(v)
    return np.array(out)


@cli.command("eval")
@click.argument("scores_csv", type=click.Path(dir_okay=False))
@click.argument("labels_csv", type=click.Path(dir_okay=False))
@click.option("--roc/--no-roc", default=False, help="Also print the ROC points.")
def eval_cmd(scores_csv, labels_csv, roc):
    """AUC, AP and EER of SCORES_CSV against the labels in LABELS_CSV."""
    scores = read_scores(scores_csv)
    labels = datagen.load_csv(labels_csv, require_labels=True).labels
    if len(scores) != len(labels):
        raise InputError(f"{len(scores)} scores but {len(labels)} labelled rows")
    rep = metrics.evaluate(scores, labels, with_roc=roc)
    pairs = [("rows", len(labels)), ("anomalies", int(labels.sum())), ("auc", rep["auc"]),
             ("ap", rep["ap"]), ("eer", rep["eer"])]
    if roc:
        pairs.append(("roc", " ".join(f"{f!r}:{t!r}" for f, t in rep["roc"])))
    _emit(pairs)


@cli.command()
@click.argument("name", type=click.Choice(sorted(experiments.EXPERIMENTS)))
@click.option("--seeds", default="0,1,2,3,4", show_default=True, envvar=_env("SEEDS"))
@click.option("--trees", type=int, default=None, envvar=_env("TREES"),
              help="Override the experiment's tree count.")
@click.option("--sample-size", type=int, default=None, envvar=_env("SAMPLE_SIZE"),
              help="Override the experiment's sample size.")
@click.option("--alpha", type=AutoOr(float), default=None, envvar=_env("ALPHA"),
              help="Override alpha (auto tunes where supported).")
@click.option("--kind", type=click.Choice(["translation", "homothety"]), default="translation",
              show_default=True, help="Drift kind (drift experiment only).")
@click.option("--magnitude", type=float, default=0.04, show_default=True,
              help="Drift magnitude (drift experiment only).")
@threads_opt
@out_opt
@click.option("--scores-out", type=click.Path(dir_okay=False), default=None,
              envvar=_env("SCORES_OUT"), help="CSV dump of every score.")
def experiment(name, seeds, trees, sample_size, alpha, kind, magnitude, threads, out,
               scores_out):
    """Run a scripted experiment and print its report."""
    kwargs = {"seeds": _seeds(seeds), "threads": threads}
    if name == "drift":
        kwargs.update(kind=kind, magnitude=magnitude)
    if name in ("donut", "drift", "flood", "donut25"):
        if trees is not None:
            kwargs["tree_count"] = trees
        if sample_size is not None:
            kwargs["sample_size"] = sample_size
        src = click.get_current_context().get_parameter_source("alpha")
        if src is not None and src.name != "DEFAULT":
            kwargs["alpha"] = "auto" if alpha is None else alpha
        if scores_out:
            kwargs["dump"] = True
    elif name == "plateaus":
        if alpha is not None:
            kwargs["alpha"] = alpha
    elif name == "buckets":
        if trees is not None:
            kwargs["tree_count"] = trees
    rep = experiments.run_experiment(name, **kwargs)
    text = rep.to_text()
    click.echo(text, nl=False)
    if name == "flood":
        click.echo(experiments.format_flood_table(rep))
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if scores_out:
        rep.write_scores(scores_out)


@cli.command()
@click.argument("model_path", type=click.Path(dir_okay=False))
def inspect(model_path):
    """Print a model file's configuration, fingerprint and leaf statistics."""
    mf = load_model(model_path)
    cfg = mf.config
    st = leaf_population_stats(mf.model)
    pairs = [("format_version", mf.format_version), ("kind", mf.kind),
             ("n_features", mf.model.n_features), ("trees", cfg.tree_count),
             ("sample_size", cfg.sample_size), ("alpha", cfg.alpha),
             ("height_factor", cfg.height_factor), ("max_height", cfg.max_height),
             ("seed", cfg.seed)]
    pairs += [(f"fingerprint.{k}", v) for k, v in mf.fingerprint.items()]
    pairs += [("n_leaves", st["n_leaves"]), ("mean_leaf_size", st["mean_leaf_size"])]
    pairs += [(f"depth_histogram.{d}", c) for d, c in st["depth_histogram"].items()]
    for k, v in mf.metadata.items():
        pairs.append((f"metadata.{k}", v))
    _emit(pairs)


def run(argv=None):
    """Run the CLI and return the exit code instead of exiting."""
    try:
        rv = cli.main(args=argv, prog_name="diffrf", standalone_mode=False)
        return rv if isinstance(rv, int) else EXIT_OK
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("error: aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except ConfigurationError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except ModelFileError as exc:
        click.echo(f"model error: {exc}", err=True)
        return EXIT_MODEL
    except (InputError, UndefinedMetricError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except OSError as exc:
        click.echo(f"data error: {exc.filename}: {exc.strerror}", err=True)
        return EXIT_DATA


def main():
    sys.exit(run())
