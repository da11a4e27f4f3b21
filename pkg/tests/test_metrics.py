import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from georefvo.metrics import (METRIC_NAMES, evaluate, increment_series, mse_mae_rot,
                              mse_mae_trans)
from georefvo.trajectory import Trajectory

finite = st.floats(-1e3, 1e3, allow_nan=False)


@pytest.mark.parametrize("vo,gps,expected", [
    ([1.0, 2.0], [1.0, 2.0], (0.0, 0.0)),
    ([1.5, 2.5], [1.0, 2.0], (0.25, 0.5)),
    ([0.0, 4.0], [0.0, 0.0], (8.0, 2.0)),
])
def test_trans_examples(vo, gps, expected):
    assert mse_mae_trans(vo, gps) == pytest.approx(expected)


@pytest.mark.parametrize("vo,gps,expected", [
    ([3.0], [3.0], (0.0, 0.0)),
    ([10.0, 20.0], [10.0, 26.0], (18.0, 3.0)),
    ([90.0], [0.0], (8100.0, 90.0)),
])
def test_rot_examples(vo, gps, expected):
    assert mse_mae_rot(vo, gps) == pytest.approx(expected)


def test_length_mismatch_and_empty_rejected():
    with pytest.raises(ValueError):
        mse_mae_trans([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        mse_mae_rot([], [])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=50))
def test_mse_at_least_mae_squared(pairs):
    a, b = np.array(pairs).T
    mse, mae = mse_mae_trans(a, b)
    assert mse >= mae * mae * (1 - 1e-12)
    assert mse >= 0 and mae >= 0


def test_metric_order():
    assert METRIC_NAMES == ("MSE_trans", "MAE_trans", "MSE_rot", "MAE_rot")


def test_self_evaluation_is_zero():
    rng = np.random.default_rng(1)
    gps = Trajectory(np.arange(20.0), np.cumsum(rng.normal(0, 3, (20, 3)), axis=0))
    assert evaluate(gps, gps).values() == (0.0, 0.0, 0.0, 0.0)


def test_single_overshoot():
    t = np.arange(12.0)
    gps = Trajectory(t, np.column_stack([t, 0 * t, 0 * t]))
    pos = gps.positions.copy()
    pos[5:, 0] += 1.0  # the increment ending at t = 5 is 2 m instead of 1 m
    r = evaluate(gps, Trajectory(t, pos))
    assert r.n_samples == 10
    assert r.mse_trans == pytest.approx(0.1) and r.mae_trans == pytest.approx(0.1)
    assert r.mse_rot == pytest.approx(0.0, abs=1e-9)


def test_standstill_is_filtered_not_strict():
    t = np.arange(10.0)
    x = np.array([0, 1, 2, 3, 3.01, 4, 5, 6, 7, 8])
    y = np.array([0, 0, 0, 0, 0.02, 0.02, 0.5, 1, 2, 3])
    gps = Trajectory(t, np.column_stack([x, y, 0 * t]))
    vo = Trajectory(t, np.column_stack([x, 0 * t, 0 * t]))
    filt, strict = evaluate(gps, vo), evaluate(gps, vo, strict=True)
    assert filt.n_degenerate_rot > 0
    assert strict.n_degenerate_rot == 0
    assert filt.mse_trans == strict.mse_trans


def test_vo_must_cover_gps():
    gps = Trajectory(np.arange(10.0), np.zeros((10, 3)))
    vo = Trajectory([4.0, 5.0], np.zeros((2, 3)))
    with pytest.raises(ValueError):
        evaluate(gps, vo)


def test_matches_recomposition():
    rng = np.random.default_rng(5)
    gps = Trajectory(np.arange(15.0), np.cumsum(rng.normal(0, 2, (15, 3)), axis=0))
    vo = Trajectory(np.arange(-0.5, 15.5, 0.04)[:-1], np.cumsum(rng.normal(0, 0.1, (399, 3)), axis=0))
    s = increment_series(gps, vo)
    r = evaluate(gps, vo)
    e = s.ds_vo - s.ds_gps
    assert r.mse_trans == pytest.approx(np.mean(e**2), rel=1e-12)
    assert math.isfinite(r.mse_rot)
