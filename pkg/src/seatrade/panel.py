"""Balanced country-day panel construction and fixed-effects estimation.

Entity fixed effects are absorbed by within-demeaning; the slope system
is then solved by QR.  Standard errors are classical, with degrees of
freedom reduced by the absorbed entity means.  Six preset model
specifications cover the composite-index and individual-policy variants,
with day dummies and an outbreak-only sample as alternates, plus lagged-
policy and week-dummy robustness variants.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import stats as _stats

from .controls_builder import COMPOSITE_POLICIES, POLICY_NAMES, CountryControls

EXPORT_LAG_DAYS = 3
OUTBREAK_CASE_THRESHOLD = 50
CONTROL_COLUMNS = ("Demand", "Cases", "Supply", "Export lag")
STAR_FOOTNOTE = "*p < 0.1, **p < 0.05, ***p < 0.01"


class PanelError(Exception):
    pass


class EmptyPanel(PanelError):
    pass


class RankDeficient(PanelError):
    def __init__(self, columns: list[str]):
        super().__init__(f"collinear columns: {', '.join(columns)}")
        self.columns = columns


@dataclass(frozen=True)
class RegressionSpec:
    regressor_set: str = "composite"  # or "individual"
    policy_lag_days: int = 0
    time_dummies: str = "none"  # "week" | "day"
    sample: str = "full"  # "outbreak_only"

    def __post_init__(self):
        if self.regressor_set not in ("composite", "individual"):
            raise PanelError(f"regressor_set {self.regressor_set!r}")
        if self.policy_lag_days not in (0, 4, 8, 12, 16):
            raise PanelError(f"policy_lag_days {self.policy_lag_days}")
        if self.time_dummies not in ("none", "week", "day"):
            raise PanelError(f"time_dummies {self.time_dummies!r}")
        if self.sample not in ("full", "outbreak_only"):
            raise PanelError(f"sample {self.sample!r}")


MODEL_PRESETS: dict[int, RegressionSpec] = {
    1: RegressionSpec("composite", 0, "none", "full"),
    2: RegressionSpec("individual", 0, "none", "full"),
    3: RegressionSpec("composite", 0, "day", "full"),
    4: RegressionSpec("individual", 0, "day", "full"),
    5: RegressionSpec("composite", 0, "none", "outbreak_only"),
    6: RegressionSpec("individual", 0, "none", "outbreak_only"),
}


@dataclass
class PanelDataset:
    """Stacked entity-major panel: row r = (entity r // n_days, day r % n_days)."""

    entities: list[str]
    days: list[dt.date]
    y: np.ndarray
    x: np.ndarray
    columns: list[str]
    mask: np.ndarray  # included observations
    policy_columns: list[str] = field(default_factory=list)

    @property
    def n_days(self) -> int:
        return len(self.days)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    def entity_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_entities), self.n_days)

    def day_index(self) -> np.ndarray:
        return np.tile(np.arange(self.n_days), self.n_entities)

    def column(self, name: str) -> np.ndarray:
        return self.x[:, self.columns.index(name)]


def build_panel(
    change: dict[str, np.ndarray],
    controls: dict[str, CountryControls],
    days: list[dt.date],
    spec: RegressionSpec,
    export_lag_days: int = EXPORT_LAG_DAYS,
    supply_lag_days: int = 7,
    outbreak_threshold: int = OUTBREAK_CASE_THRESHOLD,
) -> PanelDataset:
    """Join change series and controls on (country, day) and balance.

    The head is cropped by the longest structural lag (export lag and the
    pre-lagged supply series), policies are then lagged per the spec, and
    any entity still holding a non-finite cell is dropped entirely.  The
    outbreak-only sample masks country-days before cumulative confirmed
    cases first reach the threshold.
    """
    shared = sorted(set(change) & set(controls))
    n_days_full = len(days)
    head = max(export_lag_days, supply_lag_days)
    if not shared or n_days_full <= head:
        raise EmptyPanel("no overlapping entities/days")

    if spec.regressor_set == "composite":
        policy_cols = ["Composite"]
    else:
        policy_cols = list(POLICY_NAMES)
    columns = policy_cols + list(CONTROL_COLUMNS)

    kept_entities: list[str] = []
    y_blocks: list[np.ndarray] = []
    x_blocks: list[np.ndarray] = []
    mask_blocks: list[np.ndarray] = []
    trimmed_days = days[head:]
    for country in shared:
        series = np.asarray(change[country], dtype=float)
        ctl = controls[country]
        if len(series) != n_days_full or ctl.n_days() != n_days_full:
            raise PanelError(f"{country}: series not on the shared day grid")
        cols = []
        if spec.regressor_set == "composite":
            cols.append(ctl.composite)
        else:
            cols.extend(ctl.policies[name] for name in POLICY_NAMES)
        export_lag = np.full(n_days_full, np.nan)
        export_lag[export_lag_days:] = series[:n_days_full - export_lag_days]
        cols.extend([ctl.demand, ctl.cases, ctl.supply, export_lag])
        block = np.column_stack(cols)[head:]
        y_block = series[head:]
        if not (np.isfinite(block).all() and np.isfinite(y_block).all()):
            continue  # entity dropped: gap survived forward-fill
        if spec.sample == "outbreak_only":
            cum = ctl.cumulative_cases[head:]
            include = cum >= outbreak_threshold
            if include.any():
                first = int(np.argmax(include))
                mask_block = np.zeros(len(trimmed_days), dtype=bool)
                mask_block[first:] = True
            else:
                continue  # outbreak never reaches the threshold
        else:
            mask_block = np.ones(len(trimmed_days), dtype=bool)
        kept_entities.append(country)
        y_blocks.append(y_block)
        x_blocks.append(block)
        mask_blocks.append(mask_block)

    if not kept_entities:
        raise EmptyPanel("every entity dropped during balancing")
    panel = PanelDataset(
        entities=kept_entities,
        days=list(trimmed_days),
        y=np.concatenate(y_blocks),
        x=np.vstack(x_blocks),
        columns=columns,
        mask=np.concatenate(mask_blocks),
        policy_columns=policy_cols,
    )
    if spec.policy_lag_days:
        panel = lag_policies(panel, spec.policy_lag_days)
    return panel


def lag_policies(panel: PanelDataset, lag_days: int) -> PanelDataset:
    """Shift the policy columns back by lag_days within each entity and
    drop the head days that no longer have regressor values."""
    if lag_days == 0:
        return panel
    if lag_days >= panel.n_days:
        raise EmptyPanel(f"lag {lag_days} >= {panel.n_days} days")
    n_days, n_ent = panel.n_days, panel.n_entities
    lag_idx = [panel.columns.index(c) for c in panel.policy_columns]
    new_days = panel.days[lag_days:]
    keep = n_days - lag_days
    y = panel.y.reshape(n_ent, n_days)[:, lag_days:].reshape(-1)
    mask = panel.mask.reshape(n_ent, n_days)[:, lag_days:].reshape(-1)
    x3 = panel.x.reshape(n_ent, n_days, len(panel.columns))
    shifted = x3[:, lag_days:, :].copy()
    for j in lag_idx:
        shifted[:, :, j] = x3[:, :keep, j]
    return PanelDataset(
        entities=list(panel.entities),
        days=list(new_days),
        y=y,
        x=shifted.reshape(n_ent * keep, len(panel.columns)),
        columns=list(panel.columns),
        mask=mask,
        policy_columns=list(panel.policy_columns),
    )


def add_time_dummies(panel: PanelDataset, granularity: str) -> PanelDataset:
    """Append period indicator columns (first period is the reference)."""
    if granularity not in ("week", "day"):
        raise PanelError(f"granularity {granularity!r}")
    first = panel.days[0]
    if granularity == "day":
        period = np.array([(d - first).days for d in panel.days])
        tag = "day"
    else:
        period = np.array([(d - first).days // 7 for d in panel.days])
        tag = "week"
    periods = sorted(set(period.tolist()))
    dummy_cols = []
    names = []
    per_row = np.tile(period, panel.n_entities)
    for p in periods[1:]:
        dummy_cols.append((per_row == p).astype(float))
        names.append(f"{tag}_{p}")
    if not dummy_cols:
        return panel
    return PanelDataset(
        entities=list(panel.entities),
        days=list(panel.days),
        y=panel.y,
        x=np.column_stack([panel.x] + dummy_cols),
        columns=list(panel.columns) + names,
        mask=panel.mask,
        policy_columns=list(panel.policy_columns),
    )


def within_transform(
    panel: PanelDataset,
) -> tuple[PanelDataset, dict[str, tuple[float, np.ndarray]]]:
    """Demean y and every column by entity means over included rows.

    Returns the demeaned panel and the retained entity means (for fixed-
    effect recovery).  Excluded rows are zeroed.
    """
    ent_idx = panel.entity_index()
    y = np.zeros_like(panel.y)
    x = np.zeros_like(panel.x)
    means: dict[str, tuple[float, np.ndarray]] = {}
    for e, entity in enumerate(panel.entities):
        rows = (ent_idx == e) & panel.mask
        if not rows.any():
            continue
        y_mean = panel.y[rows].mean()
        x_mean = panel.x[rows].mean(axis=0)
        y[rows] = panel.y[rows] - y_mean
        x[rows] = panel.x[rows] - x_mean
        means[entity] = (float(y_mean), x_mean)
    demeaned = PanelDataset(
        entities=list(panel.entities),
        days=list(panel.days),
        y=y,
        x=x,
        columns=list(panel.columns),
        mask=panel.mask.copy(),
        policy_columns=list(panel.policy_columns),
    )
    return demeaned, means


@dataclass
class OlsFit:
    beta: np.ndarray
    cov: np.ndarray
    residuals: np.ndarray
    df_resid: int
    sigma2: float


def ols(
    x: np.ndarray,
    y: np.ndarray,
    dof_absorbed: int = 0,
    column_names: Optional[list[str]] = None,
) -> OlsFit:
    """Least squares by QR, classical covariance.

    dof_absorbed counts parameters removed before the solve (entity means
    under within-demeaning); they reduce the residual degrees of freedom
    but not the coefficient vector.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = x.shape
    names = column_names if column_names is not None else [f"x{j}" for j in range(k)]
    q, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    tol = max(n, k) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    bad = [names[j] for j in range(k) if diag[j] <= tol]
    if bad:
        raise RankDeficient(bad)
    beta = np.linalg.solve(r, q.T @ y)
    residuals = y - x @ beta
    df_resid = n - k - dof_absorbed
    if df_resid <= 0:
        raise PanelError(f"non-positive residual dof ({df_resid})")
    sigma2 = float(residuals @ residuals) / df_resid
    r_inv = np.linalg.solve(r, np.eye(k))
    cov = sigma2 * (r_inv @ r_inv.T)
    return OlsFit(beta=beta, cov=cov, residuals=residuals, df_resid=df_resid, sigma2=sigma2)


def stars_for(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


@dataclass
class RegressionResult:
    spec: RegressionSpec
    columns: list[str]
    named_columns: list[str]  # table rows, dummies excluded
    beta: np.ndarray
    se: np.ndarray
    tstat: np.ndarray
    pvalue: np.ndarray
    stars: list[str]
    ci_low: np.ndarray
    ci_high: np.ndarray
    r2: float
    adj_r2: float
    fstat: float
    n_obs: int
    n_entities: int

    def row(self, name: str) -> dict:
        j = self.columns.index(name)
        return {
            "beta": float(self.beta[j]),
            "se": float(self.se[j]),
            "t": float(self.tstat[j]),
            "p": float(self.pvalue[j]),
            "stars": self.stars[j],
            "ci_low": float(self.ci_low[j]),
            "ci_high": float(self.ci_high[j]),
        }


def fit(panel: PanelDataset, spec: RegressionSpec) -> RegressionResult:
    """Within-transform then QR least squares, statistics on the within fit."""
    work = panel
    if spec.time_dummies != "none":
        work = add_time_dummies(work, spec.time_dummies)
    named = list(work.policy_columns) + list(CONTROL_COLUMNS)
    demeaned, _means = within_transform(work)
    rows = demeaned.mask
    n_obs = int(rows.sum())
    live_entities = len(
        {e for e, m in zip(demeaned.entity_index(), demeaned.mask) if m}
    )
    if n_obs == 0 or live_entities == 0:
        raise EmptyPanel("no included observations")
    xd = demeaned.x[rows]
    yd = demeaned.y[rows]
    fit_ = ols(xd, yd, dof_absorbed=live_entities, column_names=work.columns)
    sst = float(yd @ yd)
    ssr = float(fit_.residuals @ fit_.residuals)
    r2 = 1.0 - ssr / sst if sst > 0 else float("nan")
    k = xd.shape[1]
    df_resid = fit_.df_resid
    df_total = n_obs - live_entities
    adj_r2 = 1.0 - (1.0 - r2) * df_total / df_resid
    fstat = (r2 / k) / ((1.0 - r2) / df_resid) if r2 < 1.0 else float("inf")
    se = np.sqrt(np.diag(fit_.cov))
    tstat = fit_.beta / se
    pvalue = 2.0 * _stats.t.sf(np.abs(tstat), df_resid)
    t_crit = float(_stats.t.ppf(0.975, df_resid))
    return RegressionResult(
        spec=spec,
        columns=list(work.columns),
        named_columns=named,
        beta=fit_.beta,
        se=se,
        tstat=tstat,
        pvalue=pvalue,
        stars=[stars_for(float(p)) for p in pvalue],
        ci_low=fit_.beta - t_crit * se,
        ci_high=fit_.beta + t_crit * se,
        r2=r2,
        adj_r2=adj_r2,
        fstat=fstat,
        n_obs=n_obs,
        n_entities=live_entities,
    )


def fit_preset(panel_builder, model: int) -> RegressionResult:
    """Build and fit one of the six preset specifications."""
    spec = MODEL_PRESETS[model]
    return fit(panel_builder(spec), spec)


ROW_ORDER = ["Composite"] + list(POLICY_NAMES) + list(CONTROL_COLUMNS)
STAT_ROWS = ("R2", "R2-adjusted", "F-statistic")


def render_results_table(
    labeled: list[tuple[str, RegressionResult]], include_ci: bool = False
) -> str:
    """Aligned text table: one beta column per fitted model, rows in the
    canonical order, fit statistics below, star footnote at the bottom."""
    headers = ["Parameter"]
    for label, _res in labeled:
        headers.append(f"{label} Beta")
        if include_ci:
            headers.append("95% CI")
    rows: list[list[str]] = []
    for name in ROW_ORDER:
        cells = [name]
        present = False
        for _label, res in labeled:
            if name in res.named_columns and name in res.columns:
                r = res.row(name)
                cells.append(f"{r['beta']:.4f}{r['stars']}")
                if include_ci:
                    cells.append(f"[{r['ci_low']:.3f}, {r['ci_high']:.3f}]")
                present = True
            else:
                cells.append("")
                if include_ci:
                    cells.append("")
        if present:
            rows.append(cells)
    per_model = 2 if include_ci else 1
    for stat in STAT_ROWS:
        cells = [stat]
        for _label, res in labeled:
            value = {"R2": res.r2, "R2-adjusted": res.adj_r2, "F-statistic": res.fstat}[stat]
            cells.append(f"{value:.3f}" if stat != "F-statistic" else f"{value:.2f}")
            cells.extend([""] * (per_model - 1))
        rows.append(cells)
    widths = [
        max(len(headers[c]), max((len(r[c]) for r in rows), default=0))
        for c in range(len(headers))
    ]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    for r in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    lines.append(STAR_FOOTNOTE)
    return "\n".join(lines) + "\n"
