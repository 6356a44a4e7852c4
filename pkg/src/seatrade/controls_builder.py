"""Policy regressors and control variables on a country-day grid.

Own-country policy levels are normalized to [0, 1] by their ordinal
maxima; the composite stringency index averages the eight C-policies.
The demand-side control is the trade-weighted mean partner stringency on
the source 0-100 scale (no lag: demand reacts immediately), and the
supply-side control is the vertical-specialization weighted import
change applied with a 7-day lag.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

POLICY_NAMES = ("C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "H2")
COMPOSITE_POLICIES = ("C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8")

# Ordinal scale maxima per policy (tracker coding; C7 has two levels,
# C8 four).
POLICY_MAX_LEVELS = {
    "C1": 3,
    "C2": 3,
    "C3": 2,
    "C4": 4,
    "C5": 2,
    "C6": 3,
    "C7": 2,
    "C8": 4,
    "H2": 3,
}

SUPPLY_LAG_DAYS = 7
POLICY_FFILL_LIMIT_DAYS = 7


class ControlsError(Exception):
    pass


class OutOfRange(ControlsError):
    pass


class NoPartners(ControlsError):
    pass


class AllZeroCoefficients(ControlsError):
    pass


class ZeroPopulation(ControlsError):
    pass


def normalize_policy(raw: float, max_level: int) -> float:
    if max_level < 1:
        raise OutOfRange(f"max level {max_level}")
    if not 0 <= raw <= max_level:
        raise OutOfRange(f"level {raw} outside [0, {max_level}]")
    return raw / max_level


def composite_stringency(normalized_c_policies: np.ndarray) -> np.ndarray:
    """Mean of the eight normalized C-policies (sum rescaled to [0, 1])."""
    arr = np.asarray(normalized_c_policies, dtype=float)
    n = len(COMPOSITE_POLICIES)
    if arr.shape[0] != n:
        raise ControlsError(f"need {n} policy rows, got {arr.shape[0]}")
    return arr.sum(axis=0) / n


def demand_shock(
    weights: dict[str, float], partner_stringency: dict[str, np.ndarray], n_days: int
) -> np.ndarray:
    """Trade-weighted mean partner stringency (0-100 scale), per day.

    Partners without stringency data are dropped and the remaining
    weights renormalized.
    """
    usable = sorted(p for p in weights if p in partner_stringency)
    if not usable:
        raise NoPartners("no partner has stringency data")
    total = sum(weights[p] for p in usable)
    if total <= 0:
        raise NoPartners("usable partner weights sum to zero")
    out = np.zeros(n_days)
    for partner in usable:
        out += (weights[partner] / total) * np.asarray(
            partner_stringency[partner], dtype=float
        )
    return out


def supply_shock(
    import_change_by_sector: np.ndarray,
    vs_row: np.ndarray,
    lag_days: int = SUPPLY_LAG_DAYS,
) -> np.ndarray:
    """VS-weighted import change, shifted by the supply lag.

    out[t] = sum_s vs_s * change[s, t - lag] / sum_s vs_s; the first
    lag_days cells are NaN (no history).
    """
    changes = np.atleast_2d(np.asarray(import_change_by_sector, dtype=float))
    vs = np.asarray(vs_row, dtype=float)
    if changes.shape[0] != vs.shape[0]:
        raise ControlsError(
            f"{changes.shape[0]} sector rows vs {vs.shape[0]} coefficients"
        )
    total = float(vs.sum())
    if total <= 0:
        raise AllZeroCoefficients("vertical-specialization weights sum to zero")
    combined = (vs / total) @ changes
    if lag_days == 0:
        return combined
    out = np.full(changes.shape[1], np.nan)
    out[lag_days:] = combined[: changes.shape[1] - lag_days]
    return out


def cases_control(confirmed: np.ndarray, population: float) -> np.ndarray:
    """Confirmed cases as a percent of population."""
    if population <= 0:
        raise ZeroPopulation(f"population {population}")
    arr = np.asarray(confirmed, dtype=float)
    if (arr < 0).any():
        raise ControlsError("negative case count")
    return 100.0 * arr / population


def forward_fill(
    values: np.ndarray, max_gap: int = POLICY_FFILL_LIMIT_DAYS, fallback: float = 0.0
) -> np.ndarray:
    """Fill NaN runs from the last seen value, up to max_gap days; longer
    gaps (and a NaN head) fall back to `fallback` (= no measure)."""
    arr = np.asarray(values, dtype=float).copy()
    last = None
    run = 0
    for i in range(len(arr)):
        if np.isnan(arr[i]):
            run += 1
            arr[i] = last if (last is not None and run <= max_gap) else fallback
        else:
            last = arr[i]
            run = 0
    return arr


@dataclass
class CountryControls:
    """Assembled per-country regressor columns on a shared daily grid."""

    country: str
    start: dt.date
    policies: dict[str, np.ndarray]  # normalized 0-1, one array per policy
    composite: np.ndarray
    demand: np.ndarray
    cases: np.ndarray
    supply: np.ndarray  # NaN head of SUPPLY_LAG_DAYS
    cumulative_cases: np.ndarray

    def n_days(self) -> int:
        return len(self.composite)
