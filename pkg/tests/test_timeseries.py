import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sstats

from seatrade.timeseries import (
    DegenerateGroup,
    DegenerateVariance,
    TooShort,
    ZeroBaseline,
    change_series,
    detrend_baseline,
    drop_leap_day,
    filter_zero_days,
    moving_average,
    pct_change,
    pearson_r,
    welch_t_test,
)


def test_detrend_constant_unchanged():
    y = np.full(240, 7.0)
    assert np.array_equal(detrend_baseline(y), y)


def test_detrend_exact_line_flattened():
    t = np.arange(240, dtype=float)
    y = 2.0 * t + 5.0
    out = detrend_baseline(y)
    assert np.allclose(out, y.mean())


def test_detrend_too_short():
    with pytest.raises(TooShort):
        detrend_baseline(np.ones(10))


def test_detrend_preserves_mean():
    rng = np.random.default_rng(4)
    y = 100 + 0.5 * np.arange(200) + rng.normal(0, 5, 200)
    out = detrend_baseline(y)
    assert abs(out.mean() - y.mean()) < 1e-9


def test_detrend_gating_matches_scipy_linregress():
    rng = np.random.default_rng(9)
    for _ in range(20):
        y = rng.normal(0, 1, 60) + rng.uniform(-0.05, 0.05) * np.arange(60)
        fit = sstats.linregress(np.arange(60.0), y)
        changed = not np.array_equal(detrend_baseline(y), y)
        assert changed == (fit.pvalue < 0.05)


def test_moving_average_constant_preserved():
    y = np.full(50, 3.25)
    assert np.array_equal(moving_average(y, 10), y)


def test_moving_average_impulse():
    y = np.zeros(40)
    y[15] = 10.0
    out = moving_average(y, 10)
    assert np.allclose(out[15:25], 1.0)
    assert np.allclose(out[25:], 0.0)
    assert np.allclose(out[:15], 0.0)


def test_moving_average_window_one_identity():
    rng = np.random.default_rng(1)
    y = rng.normal(size=30)
    assert np.array_equal(moving_average(y, 1), y)


def test_moving_average_shrinking_head():
    y = np.array([2.0, 4.0, 6.0])
    out = moving_average(y, 10)
    assert out[0] == 2.0 and out[1] == 3.0 and out[2] == 4.0


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=60),
       st.integers(1, 15))
def test_moving_average_bounded_by_input(values, window):
    y = np.array(values)
    out = moving_average(y, window)
    assert out.min() >= y.min() - 1e-9
    assert out.max() <= y.max() + 1e-9


def test_pct_change_example():
    out = pct_change(np.full(5, 90.0), np.full(5, 100.0))
    assert np.allclose(out, -10.0)


def test_pct_change_identical_zero():
    y = np.linspace(50, 150, 30)
    assert np.allclose(pct_change(y, y), 0.0)


def test_pct_change_doubling_algebra():
    rng = np.random.default_rng(2)
    base = rng.uniform(50, 150, 40)
    base = base * (100.0 / base.mean())  # mean exactly 100
    out = pct_change(2 * base, base)
    assert np.allclose(out, base)


def test_pct_change_zero_baseline():
    with pytest.raises(ZeroBaseline):
        pct_change(np.ones(5), np.zeros(5))


def test_filter_zero_days():
    entities = {
        "AAA": (np.array([1.0, 2.0, 3.0]), np.array([1.0, 1.0, 1.0])),
        "BBB": (np.array([1.0, 0.0, 3.0]), np.array([1.0, 1.0, 1.0])),
        "CCC": (np.array([1.0, 2.0, 3.0]), np.array([0.0, 1.0, 1.0])),
    }
    assert filter_zero_days(entities) == ["AAA"]


def test_filter_zero_days_identity_when_positive():
    entities = {
        "AAA": (np.ones(3), np.ones(3)),
        "BBB": (np.full(3, 2.0), np.full(3, 2.0)),
    }
    assert filter_zero_days(entities) == ["AAA", "BBB"]


def test_drop_leap_day():
    values = np.arange(91, dtype=float)  # 2020-01-01 .. 2020-03-31
    out = drop_leap_day(dt.date(2020, 1, 1), values)
    assert len(out) == 90
    assert 59.0 not in out  # index of Feb 29


def test_pearson_perfect():
    x = np.arange(10.0)
    assert pearson_r(x, x) == pytest.approx(1.0)
    assert pearson_r(x, -x) == pytest.approx(-1.0)


def test_pearson_fixed_five_point_oracle():
    x = np.array([1.0, 2.0, 4.0, 5.0, 7.0])
    y = np.array([2.0, 1.0, 5.0, 4.0, 8.0])
    # direct product-moment formula, computed independently
    n = 5
    oracle = (n * (x * y).sum() - x.sum() * y.sum()) / np.sqrt(
        (n * (x * x).sum() - x.sum() ** 2) * (n * (y * y).sum() - y.sum() ** 2)
    )
    assert pearson_r(x, y) == pytest.approx(oracle, abs=1e-12)


def test_pearson_scale_shift_invariant():
    rng = np.random.default_rng(3)
    x = rng.normal(size=25)
    y = rng.normal(size=25)
    base = pearson_r(x, y)
    assert pearson_r(3.0 * x + 11.0, y) == pytest.approx(base, abs=1e-12)
    assert pearson_r(x, -2.0 * y + 5.0) == pytest.approx(-base, abs=1e-12)


def test_pearson_degenerate():
    with pytest.raises(DegenerateVariance):
        pearson_r(np.ones(5), np.arange(5.0))


def test_welch_identical_groups():
    g = np.array([1.0, 2.0, 3.0, 4.0])
    t, p = welch_t_test(g, g.copy())
    assert t == 0.0 and p == pytest.approx(1.0)


def test_welch_swap_negates_t():
    a = np.array([1.0, 2.0, 3.0, 4.0, 9.0])
    b = np.array([2.0, 6.0, 7.0])
    t1, p1 = welch_t_test(a, b)
    t2, p2 = welch_t_test(b, a)
    assert t1 == pytest.approx(-t2)
    assert p1 == pytest.approx(p2)


def test_welch_matches_scipy_oracle():
    rng = np.random.default_rng(8)
    a = rng.normal(0, 1, 14)
    b = rng.normal(0.8, 2, 9)
    t, p = welch_t_test(a, b)
    oracle = sstats.ttest_ind(a, b, equal_var=False)
    assert t == pytest.approx(oracle.statistic, abs=1e-9)
    assert p == pytest.approx(oracle.pvalue, abs=1e-6)


def test_welch_degenerate_group():
    with pytest.raises(DegenerateGroup):
        welch_t_test(np.array([1.0]), np.array([1.0, 2.0]))
    with pytest.raises(DegenerateGroup):
        welch_t_test(np.ones(4), np.ones(4))


def test_change_series_end_to_end_shape():
    rng = np.random.default_rng(5)
    base = rng.uniform(80, 120, 120)
    cur = base * 0.9
    out = change_series(base, cur)
    assert len(out) == 120
    # a uniform 10% cut should show up as roughly -10
    assert -14 < out[20:].mean() < -6
