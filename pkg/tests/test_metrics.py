import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffrf.exceptions import InputError, UndefinedMetricError
from diffrf.metrics import (average_precision, equal_error_rate, evaluate, ks_critical_value,
                            ks_two_sample, roc_auc, roc_curve)
from oracles import naive
from scipy.stats import kstwobign, rankdata


def test_auc_worked_example():
    # tests/oracles/derive_values.py: 3 of 4 pairs ordered correctly
    assert roc_auc([0.9, 0.2, 0.5, 0.1], [1, 1, 0, 0]) == 0.75


def test_auc_ties_count_half():
    assert roc_auc([1.0, 1.0], [1, 0]) == 0.5


@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(0, 1)), min_size=2, max_size=200))
def test_auc_matches_all_pairs(rows):
    scores = [s / 2 for s, _ in rows]
    labels = [y for _, y in rows]
    if len(set(labels)) < 2:
        with pytest.raises(UndefinedMetricError):
            roc_auc(scores, labels)
        return
    assert roc_auc(scores, labels) == pytest.approx(naive.auc_all_pairs(scores, labels),
                                                    abs=1e-12)
    fpr, tpr = roc_curve(scores, labels)
    assert np.trapezoid(tpr, fpr) == pytest.approx(roc_auc(scores, labels), abs=1e-12)


def test_roc_endpoints_and_monotone():
    rng = np.random.default_rng(0)
    s, y = rng.normal(size=300), rng.integers(0, 2, 300)
    fpr, tpr = roc_curve(s, y)
    assert (fpr[0], tpr[0], fpr[-1], tpr[-1]) == (0.0, 0.0, 1.0, 1.0)
    assert (np.diff(fpr) >= 0).all() and (np.diff(tpr) >= 0).all()


def test_ap_perfect_and_second_place():
    assert average_precision([3, 2, 1, 0], [1, 1, 0, 0]) == 1.0
    assert average_precision([3, 2, 1, 0], [0, 1, 0, 0]) == 0.5


def test_ap_random_ranking_is_near_prevalence():
    rng = np.random.default_rng(1)
    y = (rng.random(20000) < 0.1).astype(int)
    assert average_precision(rng.random(20000), y) == pytest.approx(0.1, abs=0.01)


@given(st.lists(st.floats(-100, 100), min_size=4, max_size=60), st.data())
def test_rank_metrics_invariant_to_monotone_transform(s, data):
    y = data.draw(st.lists(st.integers(0, 1), min_size=len(s), max_size=len(s)))
    if len(set(y)) < 2:
        return
    t = rankdata(s, method="dense") * 3.0 + 1.0  # strictly increasing, ties kept
    assert roc_auc(s, y) == pytest.approx(roc_auc(t, y), abs=1e-12)
    assert average_precision(s, y) == pytest.approx(average_precision(t, y), abs=1e-12)


def test_eer_perfect_and_inverted():
    assert equal_error_rate([3, 2, 1, 0], [1, 1, 0, 0]) == 0.0
    assert equal_error_rate([0, 1, 2, 3], [1, 1, 0, 0]) == 1.0


def test_eer_random_is_near_half():
    rng = np.random.default_rng(2)
    assert equal_error_rate(rng.random(10000), rng.integers(0, 2, 10000)) == pytest.approx(
        0.5, abs=0.03)


def test_eer_interpolates():
    # ROC: (0,0) (0,.5) (.5,.5) (.5,1) (1,1); crossing of fpr and 1 - tpr at 0.5
    assert equal_error_rate([4, 3, 2, 1], [1, 0, 1, 0]) == 0.5


def test_ks_identical_samples():
    a = np.random.default_rng(3).normal(size=500)
    stat, p = ks_two_sample(a, a)
    assert stat == 0.0 and p == 1.0


def test_ks_disjoint_samples():
    stat, p = ks_two_sample(np.arange(100.0), np.arange(100.0) + 1000)
    assert stat == 1.0 and p == 2.22e-16


def test_ks_shifted_uniforms():
    # expected statistic 0.3; tests/oracles/derive_values.py simulates 0.325 at n = 1000
    rng = np.random.default_rng(4)
    stat, p = ks_two_sample(rng.random(1000), rng.random(1000) + 0.3)
    assert stat == pytest.approx(0.3, abs=0.05)
    assert p < 1e-20 or p == 2.22e-16


def test_ks_agrees_with_scipy():
    from scipy.stats import ks_2samp
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=700), rng.normal(0.1, size=900)
    stat, p = ks_two_sample(a, b)
    assert stat == pytest.approx(ks_2samp(a, b).statistic, abs=1e-15)
    # limiting Kolmogorov distribution at sqrt(nm/(n+m)) * D
    assert p == pytest.approx(kstwobign.sf(np.sqrt(700 * 900 / 1600) * stat), rel=1e-9)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=50),
       st.lists(st.floats(-5, 5), min_size=1, max_size=50))
def test_ks_symmetric(a, b):
    assert ks_two_sample(a, b)[0] == ks_two_sample(b, a)[0]


def test_ks_critical_values_at_1000():
    assert ks_critical_value(1000, 1000, 0.1) == pytest.approx(0.0547, abs=5e-4)
    assert ks_critical_value(1000, 1000, 0.01) == pytest.approx(0.0728, abs=5e-4)
    assert ks_critical_value(1000, 1000, 0.005) == pytest.approx(0.077, abs=5e-4)
    assert ks_critical_value(1000, 1000, 0.001) == pytest.approx(0.0873, abs=5e-4)


def test_input_errors():
    with pytest.raises(InputError):
        roc_auc([1, 2], [1])
    with pytest.raises(InputError):
        roc_auc([1, 2], [1, 2])
    with pytest.raises(InputError):
        ks_two_sample([], [1.0])
    with pytest.raises(UndefinedMetricError):
        average_precision([1, 2], [0, 0])
    with pytest.raises(UndefinedMetricError):
        equal_error_rate([1, 2], [1, 1])


def test_evaluate_bundle():
    out = evaluate([3, 2, 1, 0], [1, 1, 0, 0])
    assert (out["auc"], out["ap"], out["eer"]) == (1.0, 1.0, 0.0)
    assert out["roc"][0] == (0.0, 0.0) and out["roc"][-1] == (1.0, 1.0)
