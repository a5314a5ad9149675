"""Compare the compiled and NumPy kernels on forest building and scoring.

    python3 benchmarks/bench_backends.py [--rows 20000] [--dims 10] [--trees 64]

Both backends consume the same random streams, so the script also checks that
their outputs are identical before reporting timings.
"""

import argparse
import time

import numpy as np

from diffrf import _backend
from diffrf.forest import ForestConfig, build_forest
from diffrf.scoring import batch_scores, pointwise_score


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--dims", type=int, default=10)
    ap.add_argument("--trees", type=int, default=64)
    ap.add_argument("--sample-size", type=int, default=1024)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    try:
        _backend.get("cython")
    except ImportError:
        raise SystemExit("compiled kernels are not built; nothing to compare")

    rng = np.random.default_rng(0)
    X = rng.normal(size=(args.rows, args.dims))
    cfg = ForestConfig(args.trees, args.sample_size, 1.0, seed=0)
    results = {}
    for name in ("cython", "python"):
        t_build, forest = best_of(
            lambda: build_forest(X, cfg, threads=args.threads, backend=name), args.repeat)
        t_pw, pw = best_of(
            lambda: pointwise_score(forest, X, threads=args.threads, backend=name), args.repeat)
        t_co, co = best_of(
            lambda: batch_scores(forest, X, threads=args.threads, backend=name), args.repeat)
        results[name] = (t_build, t_pw, t_co, forest, pw.scores, co["collective"].scores)

    fc, fp = results["cython"][3].packed, results["python"][3].packed
    same_trees = all(np.array_equal(getattr(fc, k), getattr(fp, k))
                     for k in ("feature", "threshold", "left", "right", "leaf_count"))
    # scores may differ by an ulp: NumPy's exp2 is not the C library's
    diff_pw = float(np.max(np.abs(results["cython"][4] - results["python"][4])))
    diff_co = float(np.max(np.abs(results["cython"][5] - results["python"][5])))

    print(f"rows={args.rows} dims={args.dims} trees={args.trees} "
          f"sample_size={args.sample_size} threads={args.threads}")
    print(f"{'stage':<12}{'cython s':>12}{'python s':>12}{'speedup':>10}")
    for i, stage in enumerate(("build", "pointwise", "collective")):
        c, p = results["cython"][i], results["python"][i]
        print(f"{stage:<12}{c:12.4f}{p:12.4f}{p / c:10.1f}x")
    print(f"identical trees={same_trees}; max score difference "
          f"pointwise={diff_pw:.1e} collective={diff_co:.1e}")


if __name__ == "__main__":
    main()
