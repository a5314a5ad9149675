import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffrf.exceptions import ConfigurationError
from diffrf.tuning import (DEFAULT_GRID, AlphaReport, distribution_distance, nearest_rank,
                           partition, tune_alpha)

# frozen from tests/oracles/derive_values.py
BASE = np.arange(100.0)


def test_nearest_rank():
    assert nearest_rank(BASE, 95) == 94.0
    assert nearest_rank(BASE, 99) == 98.0
    assert nearest_rank(np.array([7.0]), 95) == 7.0
    assert nearest_rank(np.arange(3.0), 1) == 0.0


def test_distance_identical_distributions():
    assert distribution_distance(BASE, BASE) == 0.0


def test_distance_test_all_below():
    assert distribution_distance(BASE - 1000, BASE) == 15.0


def test_distance_test_all_above():
    assert distribution_distance(BASE + 1000, BASE) == 485.0


def test_distance_half_above():
    assert distribution_distance(np.arange(200.0), BASE) == 242.5


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=80),
       st.lists(st.floats(-10, 10), min_size=1, max_size=80))
def test_distance_bounds(a, b):
    assert 0.0 <= distribution_distance(a, b) <= 485.0


def test_distance_rejects_empty():
    with pytest.raises(ValueError):
        distribution_distance([], [1.0])


@pytest.mark.parametrize("n, psi, sizes", [(100, 25, [25] * 4), (103, 25, [26, 26, 26, 25])])
def test_partition_sizes(n, psi, sizes):
    folds = partition(np.zeros((n, 1)), psi, np.random.default_rng(0))
    assert [len(f) for f in folds] == sizes
    assert sorted(np.concatenate(folds).tolist()) == list(range(n))


def test_partition_donut_scale():
    folds = partition(np.zeros((2000, 2)), 256, np.random.default_rng(1))
    assert len(folds) == 7
    assert {len(f) for f in folds} == {285, 286}


def test_partition_needs_more_rows_than_fold_size():
    with pytest.raises(ConfigurationError):
        partition(np.zeros((10, 1)), 10, np.random.default_rng(0))


@pytest.fixture(scope="module")
def data():
    return np.random.default_rng(0).normal(size=(300, 2))


def test_single_candidate_grid(data):
    rep = tune_alpha(data, tree_count=4, sample_size=50, iterations=2, grid=[3.0])
    assert rep.selected == 3.0
    assert rep.R.shape == (1,)


def test_report_shapes_and_selection(data):
    rep = tune_alpha(data, tree_count=8, sample_size=50, iterations=4, seed=3)
    assert rep.trajectory.shape == (4, len(DEFAULT_GRID))
    assert np.array_equal(rep.trajectory[-1], rep.R)
    assert (rep.R >= 0).all()
    best = rep.R.min()
    assert rep.selected == min(a for a, r in zip(rep.grid, rep.R) if r == best)
    assert rep.step_differences.shape == (3,)
    assert set(rep.to_dict()) == {"grid", "R", "selected", "trajectory"}


def test_tuning_is_deterministic(data):
    a = tune_alpha(data, tree_count=8, sample_size=50, iterations=3, seed=9)
    b = tune_alpha(data, tree_count=8, sample_size=50, iterations=3, seed=9, threads=2)
    assert a.R.tobytes() == b.R.tobytes()
    assert a.selected == b.selected


def test_ties_go_to_smallest_alpha(data):
    # alphas so small that every point-wise score rounds to -1: all R equal
    rep = tune_alpha(data, tree_count=2, sample_size=50, iterations=1, grid=[1e-300, 1e-310])
    assert rep.R[0] == rep.R[1]
    assert rep.selected == 1e-310


@pytest.mark.parametrize("kwargs", [dict(grid=[]), dict(grid=[0.0, 1.0]), dict(iterations=0),
                                    dict(sample_size=200)])
def test_tuning_configuration_errors(data, kwargs):
    base = dict(tree_count=2, sample_size=50, iterations=1)
    base.update(kwargs)
    with pytest.raises(ConfigurationError):
        tune_alpha(data, **base)


def test_convergence_slope_of_power_law():
    k = np.arange(1, 13)
    traj = np.cumsum(1.0 / k[:, None] ** 1.5, axis=0) * np.ones((1, 2))
    rep = AlphaReport(grid=[1.0, 2.0], R=traj[-1], selected=1.0, trajectory=traj)
    # steps are sqrt(2) * k^-1.5 for k = 2..12
    assert rep.convergence_slope() == pytest.approx(-1.5, abs=1e-9)


def test_convergence_slope_undefined_without_movement():
    rep = AlphaReport(grid=[1.0], R=np.zeros(1), selected=1.0, trajectory=np.zeros((5, 1)))
    assert np.isnan(rep.convergence_slope())
