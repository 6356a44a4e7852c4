import datetime as dt

import numpy as np
import pytest

from seatrade.panel import (
    EXPORT_LAG_DAYS,
    MODEL_PRESETS,
    PanelDataset,
    RankDeficient,
    RegressionSpec,
    STAR_FOOTNOTE,
    add_time_dummies,
    build_panel,
    fit,
    lag_policies,
    ols,
    render_results_table,
    stars_for,
    within_transform,
)
from seatrade.synthetic import PLANTED_BETAS, make_planted_panel


def normal_equations_oracle(x, y):
    """Independent least-squares oracle via the normal equations."""
    xtx = x.T @ x
    return np.linalg.solve(xtx, x.T @ y)


def _tiny_panel(y_values, x_values, entities=1):
    n = len(y_values)
    days = [dt.date(2020, 1, 1) + dt.timedelta(days=k) for k in range(n)]
    return PanelDataset(
        entities=[f"E{i}" for i in range(entities)],
        days=days,
        y=np.asarray(y_values * entities, dtype=float),
        x=np.asarray(x_values * entities, dtype=float).reshape(n * entities, -1),
        columns=["x0"],
        mask=np.ones(n * entities, dtype=bool),
        policy_columns=["x0"],
    )


def test_within_transform_example():
    panel = _tiny_panel([1.0, 2.0, 3.0], [[1.0], [2.0], [3.0]])
    demeaned, means = within_transform(panel)
    assert np.allclose(demeaned.y, [-1.0, 0.0, 1.0])
    assert means["E0"][0] == 2.0


def test_within_constant_column_all_zero():
    panel = _tiny_panel([1.0, 2.0, 3.0], [[5.0], [5.0], [5.0]])
    demeaned, _ = within_transform(panel)
    assert np.allclose(demeaned.x, 0.0)


def test_within_identical_entities_identical_blocks():
    panel = _tiny_panel([1.0, 4.0, 7.0], [[2.0], [3.0], [4.0]], entities=2)
    demeaned, _ = within_transform(panel)
    assert np.allclose(demeaned.y[:3], demeaned.y[3:])
    assert np.allclose(demeaned.x[:3], demeaned.x[3:])


def test_ols_exact_line():
    x = np.arange(1.0, 11.0).reshape(-1, 1)
    y = 2.0 * x[:, 0]
    fit_ = ols(x, y)
    assert fit_.beta[0] == pytest.approx(2.0, abs=1e-12)


def test_ols_matches_normal_equations_oracle():
    rng = np.random.default_rng(17)
    for _ in range(20):
        x = rng.normal(size=(100, 3))
        y = rng.normal(size=100)
        got = ols(x, y).beta
        want = normal_equations_oracle(x, y)
        assert np.abs(got - want).max() < 1e-8


def test_ols_duplicated_column_named():
    rng = np.random.default_rng(18)
    col = rng.normal(size=50)
    x = np.column_stack([col, col])
    with pytest.raises(RankDeficient) as err:
        ols(x, rng.normal(size=50), column_names=["first", "dupe"])
    assert "dupe" in str(err.value)


def test_lsdv_equivalence():
    rng = np.random.default_rng(19)
    n_ent, n_days, k = 6, 30, 3
    x = rng.normal(size=(n_ent * n_days, k))
    effects = np.repeat(rng.normal(0, 2, n_ent), n_days)
    beta_true = np.array([1.5, -0.7, 0.3])
    y = x @ beta_true + effects + rng.normal(0, 1, n_ent * n_days)

    days = [dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(n_days)]
    panel = PanelDataset(
        entities=[f"E{i}" for i in range(n_ent)],
        days=days, y=y, x=x, columns=["a", "b", "c"],
        mask=np.ones(n_ent * n_days, dtype=bool), policy_columns=["a"],
    )
    demeaned, _ = within_transform(panel)
    within_beta = ols(demeaned.x, demeaned.y, dof_absorbed=n_ent).beta

    dummies = np.zeros((n_ent * n_days, n_ent))
    for e in range(n_ent):
        dummies[e * n_days:(e + 1) * n_days, e] = 1.0
    lsdv_beta = ols(np.column_stack([x, dummies]), y).beta[:k]
    assert np.abs(within_beta - lsdv_beta).max() < 1e-8


def test_scale_equivariance():
    rng = np.random.default_rng(20)
    x = rng.normal(size=(200, 3))
    y = rng.normal(size=200)
    base = ols(x, y)
    scaled_x = x.copy()
    scaled_x[:, 1] *= 2.0  # power of two: exact in binary floating point
    scaled = ols(scaled_x, y)
    assert scaled.beta[1] == base.beta[1] / 2.0
    base_t = base.beta / np.sqrt(np.diag(base.cov))
    scaled_t = scaled.beta / np.sqrt(np.diag(scaled.cov))
    assert np.allclose(base_t, scaled_t, rtol=1e-12)


def _planted(seed=1, n_countries=12, n_days=90, noise_sd=0.0):
    return make_planted_panel(n_countries, n_days, seed=seed, noise_sd=noise_sd)


def test_build_panel_complete_entities_retained():
    change, controls, days = _planted()
    spec = RegressionSpec("individual")
    panel = build_panel(change, controls, days, spec)
    assert panel.entities == sorted(change)
    assert len(panel.days) == len(days) - 7  # supply lag crop
    assert np.isfinite(panel.x).all() and np.isfinite(panel.y).all()


def test_build_panel_drops_entity_with_gap():
    change, controls, days = _planted()
    victim = sorted(change)[0]
    controls[victim].demand[40] = np.nan  # unfillable hole
    panel = build_panel(change, controls, days, RegressionSpec("individual"))
    assert victim not in panel.entities
    assert len(panel.entities) == len(change) - 1


def test_build_panel_outbreak_sample_masks_head():
    change, controls, days = _planted()
    spec = RegressionSpec("composite", sample="outbreak_only")
    panel = build_panel(change, controls, days, spec)
    ent_idx = panel.entity_index()
    for e, country in enumerate(panel.entities):
        rows = ent_idx == e
        included = panel.mask[rows]
        cum = controls[country].cumulative_cases[7:]
        crossing = cum >= 50
        assert included.sum() == crossing.sum()
        if included.any():
            first = int(np.argmax(included))
            assert not included[:first].any() and included[first:].all()


def test_lag_policies_identity_and_shift():
    change, controls, days = _planted()
    panel = build_panel(change, controls, days, RegressionSpec("individual"))
    assert lag_policies(panel, 0) is panel
    lagged = lag_policies(panel, 4)
    assert len(lagged.days) == len(panel.days) - 4
    j = panel.columns.index("C2")
    n_days = panel.n_days
    for e in range(3):
        raw = panel.x[e * n_days:(e + 1) * n_days, j]
        shifted = lagged.x[e * (n_days - 4):(e + 1) * (n_days - 4), j]
        assert np.array_equal(shifted, raw[:n_days - 4])
    # non-policy columns crop without shifting
    jd = panel.columns.index("Demand")
    raw_d = panel.x[:n_days, jd]
    assert np.array_equal(lagged.x[:n_days - 4, jd], raw_d[4:])


def test_time_dummies_counts():
    n = 14
    days = [dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(n)]
    panel = PanelDataset(
        entities=["E0"], days=days, y=np.zeros(n), x=np.zeros((n, 1)),
        columns=["Composite"], mask=np.ones(n, dtype=bool),
        policy_columns=["Composite"],
    )
    weekly = add_time_dummies(panel, "week")
    assert len(weekly.columns) == 1 + 1
    daily = add_time_dummies(panel, "day")
    assert len(daily.columns) == 1 + 13
    dummy_block = daily.x[:, 1:]
    # reference day has all-zero dummies; every other day exactly one
    assert np.allclose(dummy_block.sum(axis=1)[1:], 1.0)
    assert dummy_block[0].sum() == 0.0


def test_fit_noise_free_recovers_exactly():
    change, controls, days = _planted(seed=5, noise_sd=0.0)
    spec = RegressionSpec("individual")
    result = fit(build_panel(change, controls, days, spec), spec)
    for name, value in PLANTED_BETAS.items():
        got = result.row(name)["beta"]
        assert got == pytest.approx(value, abs=1e-8), name


def test_fit_noisy_recovers_approximately():
    change, controls, days = _planted(seed=6, n_countries=40, n_days=160, noise_sd=3.0)
    spec = RegressionSpec("individual")
    result = fit(build_panel(change, controls, days, spec), spec)
    row = result.row("C2")
    assert abs(row["beta"] - PLANTED_BETAS["C2"]) < 4 * row["se"]
    assert result.row("Export lag")["beta"] == pytest.approx(0.35, abs=0.05)


def test_day_dummies_never_lower_r2():
    change, controls, days = _planted(seed=7, noise_sd=4.0)
    base_spec = RegressionSpec("individual")
    panel = build_panel(change, controls, days, base_spec)
    base = fit(panel, base_spec)
    dummied = fit(panel, RegressionSpec("individual", time_dummies="day"))
    assert dummied.r2 >= base.r2 - 1e-12


def test_model_presets_shapes():
    change, controls, days = _planted(seed=8, noise_sd=2.0)
    for model, spec in MODEL_PRESETS.items():
        result = fit(build_panel(change, controls, days, spec), spec)
        if spec.regressor_set == "composite":
            assert "Composite" in result.named_columns
            assert "C1" not in result.named_columns
        else:
            assert [c for c in result.named_columns[:9]] == [
                "C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "H2"
            ]
        assert result.named_columns[-4:] == ["Demand", "Cases", "Supply", "Export lag"]
        assert result.adj_r2 <= result.r2 + 1e-12


def test_stars_thresholds():
    assert stars_for(0.005) == "***"
    assert stars_for(0.03) == "**"
    assert stars_for(0.07) == "*"
    assert stars_for(0.2) == ""


def test_render_table_layout():
    change, controls, days = _planted(seed=9, noise_sd=2.0)
    spec1 = MODEL_PRESETS[1]
    spec2 = MODEL_PRESETS[2]
    r1 = fit(build_panel(change, controls, days, spec1), spec1)
    r2 = fit(build_panel(change, controls, days, spec2), spec2)
    table = render_results_table([("Model1", r1), ("Model2", r2)])
    lines = table.splitlines()
    assert lines[0].startswith("Parameter")
    assert lines[-1] == STAR_FOOTNOTE
    names = [line.split()[0] for line in lines[1:-1]]
    assert names == [
        "Composite", "C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "H2",
        "Demand", "Cases", "Supply", "Export", "R2", "R2-adjusted", "F-statistic",
    ]  # "Export lag" splits on whitespace
    ci_table = render_results_table([("Base", r2)], include_ci=True)
    assert "95% CI" in ci_table.splitlines()[0]
    assert "[" in ci_table
