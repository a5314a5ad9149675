import os
import subprocess
import sys

import numpy as np
import pytest

from diffrf import _backend
from diffrf.forest import ForestConfig, build_forest
from diffrf.iforest import build_iforest, mean_path_length
from diffrf.scoring import apply, batch_scores, leaf_distances, pointwise_score

try:
    _backend.get("cython")
    HAVE_CORE = True
except ImportError:
    HAVE_CORE = False

needs_core = pytest.mark.skipif(not HAVE_CORE, reason="compiled kernels not built")

# NumPy's exp2 and the C library's differ by at most one ulp on some inputs;
# scores are means of values in [0, 1], so the bound is a few ulps of 1.
SCORE_TOL = 1e-15


@pytest.fixture(scope="module", params=[(0, 2), (1, 5), (2, 1)])
def case(request):
    seed, d = request.param
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(600, d)), 2)
    cfg = ForestConfig(tree_count=12, sample_size=200, alpha=3.0, seed=seed)
    return X, cfg


@needs_core
def test_trees_identical(case):
    X, cfg = case
    a = build_forest(X, cfg, backend="cython").packed
    b = build_forest(X, cfg, backend="python").packed
    for name in ("feature", "threshold", "left", "right", "leaf_count", "leaf_depth",
                 "centroid", "sigma"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes(), name


@needs_core
def test_leaf_routing_and_distances_identical(case):
    X, cfg = case
    forest = build_forest(X, cfg)
    Q = np.random.default_rng(9).normal(size=(300, X.shape[1]))
    assert np.array_equal(apply(forest, Q, backend="cython"), apply(forest, Q, backend="python"))
    assert leaf_distances(forest, Q, backend="cython").tobytes() == \
        leaf_distances(forest, Q, backend="python").tobytes()


@needs_core
def test_scores_agree_to_rounding(case):
    X, cfg = case
    forest = build_forest(X, cfg)
    Q = np.random.default_rng(10).normal(size=(300, X.shape[1]))
    a, b = batch_scores(forest, Q, backend="cython"), batch_scores(forest, Q, backend="python")
    for k in a:
        np.testing.assert_allclose(a[k].scores, b[k].scores, rtol=0, atol=SCORE_TOL)
    np.testing.assert_allclose(pointwise_score(forest, Q, backend="cython").scores,
                               pointwise_score(forest, Q, backend="python").scores,
                               rtol=0, atol=SCORE_TOL)


@needs_core
def test_iforest_identical(case):
    X, cfg = case
    a = build_iforest(X, 8, 64, seed=cfg.seed, backend="cython")
    b = build_iforest(X, 8, 64, seed=cfg.seed, backend="python")
    assert a.packed.threshold.tobytes() == b.packed.threshold.tobytes()
    assert mean_path_length(a, X, backend="cython").tobytes() == \
        mean_path_length(a, X, backend="python").tobytes()


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_core)])
def test_thread_count_invariance(case, backend):
    X, cfg = case
    f1 = build_forest(X, cfg, threads=1, backend=backend)
    f4 = build_forest(X, cfg, threads=4, backend=backend)
    assert f1.packed.threshold.tobytes() == f4.packed.threshold.tobytes()
    s1 = batch_scores(f1, X, threads=1, backend=backend)
    s4 = batch_scores(f1, X, threads=4, backend=backend)
    for k in s1:
        assert s1[k].scores.tobytes() == s4[k].scores.tobytes()


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_environment_forces_fallback():
    env = dict(os.environ, DIFFRF_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import diffrf; print(diffrf.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
