"""Daily-series transforms for the export-change metric, plus the
validation statistics (correlation, two-sample comparison).

The change metric compares a 2020 series against the matching 2019
window: detrend 2019 when its linear trend is statistically significant,
smooth both with a trailing 10-day moving average, then express 2020 as
a percentage deviation from the 2019 mean daily level.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np
from scipy import stats as _stats

TREND_P_THRESHOLD = 0.05
SMOOTHING_WINDOW = 10
MIN_DETREND_OBS = 30


class SeriesError(Exception):
    pass


class TooShort(SeriesError):
    pass


class ZeroBaseline(SeriesError):
    pass


class DegenerateVariance(SeriesError):
    pass


class DegenerateGroup(SeriesError):
    pass


@dataclass
class DailyChangeSeries:
    entity: str
    start: dt.date
    values: np.ndarray  # percent deviations


def detrend_baseline(values: np.ndarray) -> np.ndarray:
    """Remove a fitted linear trend when it is significant at 5%.

    Returns residuals plus the original mean (so the mean is preserved);
    an insignificant trend leaves the series untouched.  A perfectly
    linear series has zero residual variance and counts as significant.
    """
    y = np.asarray(values, dtype=float)
    n = len(y)
    if n < MIN_DETREND_OBS:
        raise TooShort(f"{n} < {MIN_DETREND_OBS} observations")
    t = np.arange(n, dtype=float)
    t_c = t - t.mean()
    y_c = y - y.mean()
    sxx = float(t_c @ t_c)
    slope = float(t_c @ y_c) / sxx
    residuals = y_c - slope * t_c
    ssr = float(residuals @ residuals)
    if ssr <= 1e-12 * max(1.0, float(y_c @ y_c)):
        significant = abs(slope) > 0.0  # exact line: trend certain
    else:
        se = np.sqrt(ssr / (n - 2) / sxx)
        t_stat = slope / se
        p = 2.0 * float(_stats.t.sf(abs(t_stat), n - 2))
        significant = p < TREND_P_THRESHOLD
    if not significant:
        return y.copy()
    return residuals + y.mean()


def moving_average(values: np.ndarray, window: int = SMOOTHING_WINDOW) -> np.ndarray:
    """Trailing mean; the head uses the shorter window actually available,
    so no future data leaks into any day."""
    if window < 1:
        raise SeriesError(f"window {window}")
    y = np.asarray(values, dtype=float)
    if window == 1:
        return y.copy()
    out = np.empty_like(y)
    for i in range(len(y)):
        lo = max(0, i - window + 1)
        out[i] = y[lo : i + 1].mean()
    return out


def pct_change(current: np.ndarray, baseline: np.ndarray) -> np.ndarray:
    """Percent deviation of `current` from `baseline`, normalized by the
    baseline's mean daily value (not the same-day value)."""
    cur = np.asarray(current, dtype=float)
    base = np.asarray(baseline, dtype=float)
    if len(cur) != len(base):
        raise SeriesError(f"lengths differ: {len(cur)} vs {len(base)}")
    mean_base = float(base.mean())
    if mean_base <= 0:
        raise ZeroBaseline(f"baseline mean {mean_base}")
    return 100.0 * (cur - base) / mean_base


def has_zero_day(raw: np.ndarray) -> bool:
    return bool((np.asarray(raw) == 0.0).any())


def filter_zero_days(entities: dict[str, tuple[np.ndarray, np.ndarray]]) -> list[str]:
    """Keep entities whose raw baseline and current exports are strictly
    positive every day.  Input maps entity -> (raw_baseline, raw_current)."""
    return [
        entity
        for entity in sorted(entities)
        if not has_zero_day(entities[entity][0])
        and not has_zero_day(entities[entity][1])
    ]


def drop_leap_day(start: dt.date, values: np.ndarray) -> np.ndarray:
    """Remove 2020-02-29 (or any Feb 29 in range) so day-of-year pairing
    against a non-leap baseline lines up."""
    out = []
    for i, v in enumerate(np.asarray(values, dtype=float)):
        day = start + dt.timedelta(days=i)
        if day.month == 2 and day.day == 29:
            continue
        out.append(v)
    return np.array(out)


def change_series(
    baseline_raw: np.ndarray,
    current_raw: np.ndarray,
    window: int = SMOOTHING_WINDOW,
) -> np.ndarray:
    """Full metric: detrend the baseline year, smooth both, take the
    percent deviation from the baseline mean."""
    base = moving_average(detrend_baseline(baseline_raw), window)
    cur = moving_average(np.asarray(current_raw, dtype=float), window)
    return pct_change(cur, base)


def pearson_r(x: np.ndarray, y: np.ndarray) -> float:
    """Product-moment correlation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise SeriesError("length mismatch")
    if len(x) < 3:
        raise SeriesError(f"need >= 3 points, got {len(x)}")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(xc @ xc)
    sy = float(yc @ yc)
    if sx == 0.0 or sy == 0.0:
        raise DegenerateVariance("zero variance")
    return float((xc @ yc) / np.sqrt(sx * sy))


def welch_t_test(group_a: np.ndarray, group_b: np.ndarray) -> tuple[float, float]:
    """Welch's unequal-variance t statistic and two-sided p-value, with
    Welch-Satterthwaite degrees of freedom."""
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise DegenerateGroup(f"group sizes {na}, {nb}")
    va = float(a.var(ddof=1))
    vb = float(b.var(ddof=1))
    if va == 0.0 and vb == 0.0:
        raise DegenerateGroup("both groups constant")
    sa, sb = va / na, vb / nb
    t_stat = (float(a.mean()) - float(b.mean())) / np.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    p = 2.0 * float(_stats.t.sf(abs(t_stat), df))
    return t_stat, p
