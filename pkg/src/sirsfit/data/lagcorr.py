"""Lagged correlation between monthly incidence and daily weather."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .io import IncidenceSeries, MeteoSeries

SHIFT_MODES = ("daily", "monthly")


@dataclass(frozen=True)
class LagCorrelation:
    variable: str
    lag: int
    correlation: float

    def __post_init__(self):
        if not -1 - 1e-12 <= self.correlation <= 1 + 1e-12:
            raise ValueError(f"correlation {self.correlation} outside [-1, 1]")
        if self.lag < 0:
            raise ValueError("lag must be nonnegative")


def month_bounds(months: list[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    """First day and one-past-last day of each calendar month."""
    starts = np.array([np.datetime64(f"{y:04d}-{m:02d}", "M") for y, m in months])
    return starts.astype("datetime64[D]"), (starts + 1).astype("datetime64[D]")


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc, yc = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(xc @ xc), np.sqrt(yc @ yc)
    if sx == 0 or sy == 0:
        raise ValueError("zero-variance series")
    return float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))


def monthly_medians(dates: np.ndarray, values: np.ndarray, months, lag: int = 0) -> np.ndarray:
    """Median per calendar month of the series shifted backward by ``lag`` days.

    The month value uses days ``first - lag`` up to ``last - lag``.
    """
    starts, ends = month_bounds(months)
    origin = dates[0]
    lo = (starts - origin).astype(int) - lag
    hi = (ends - origin).astype(int) - lag
    if lo.min() < 0 or hi.max() > len(values):
        raise ValueError(f"weather series does not cover the incidence window with a {lag}-day lag")
    return np.array([np.median(values[a:b]) for a, b in zip(lo, hi)])


def _monthly_shifted(dates, values, months, lag: int) -> np.ndarray:
    # medians of the unshifted months, read off lag days earlier by linear
    # interpolation between month midpoints; the month before the window may
    # be covered only partly
    y, m = months[0]
    all_months = [(y - 1, 12) if m == 1 else (y, m - 1)] + list(months)
    starts, ends = month_bounds(all_months)
    lo = np.maximum((starts - dates[0]).astype(int), 0)
    hi = (ends - dates[0]).astype(int)
    if hi[0] <= lo[0] or hi.max() > len(values):
        raise ValueError("weather series does not cover the incidence window")
    med = np.array([np.median(values[a:b]) for a, b in zip(lo, hi)])
    mid = 0.5 * (lo + hi).astype(float)
    query = mid[1:] - lag
    if query[0] < mid[0]:
        raise ValueError(f"weather series does not cover the incidence window with a {lag}-day lag")
    return np.interp(query, mid, med)


def lagged_correlations(incidence: IncidenceSeries, meteo: MeteoSeries, max_lag: int = 30,
                        variables=None, shift: str = "daily") -> list[LagCorrelation]:
    """Correlation of monthly incidence with each weather variable for lags ``0..max_lag``.

    With ``shift="daily"`` the daily series is shifted back by the lag before
    the monthly medians are taken. ``shift="monthly"`` takes the medians first
    and reads the monthly series ``lag`` days earlier.
    """
    if shift not in SHIFT_MODES:
        raise ValueError(f"shift must be one of {SHIFT_MODES}")
    if max_lag < 0:
        raise ValueError("max_lag must be nonnegative")
    names = meteo.names if variables is None else list(variables)
    out = []
    for name in names:
        values = meteo[name]
        for lag in range(max_lag + 1):
            if shift == "daily":
                monthly = monthly_medians(meteo.dates, values, incidence.months, lag)
            else:
                monthly = _monthly_shifted(meteo.dates, values, incidence.months, lag)
            out.append(LagCorrelation(name, lag, pearson(monthly, incidence.cases)))
    return out


def best_lags(table: list[LagCorrelation]) -> dict[str, LagCorrelation]:
    """Lag with the largest ``|correlation|`` per variable (the smallest lag on ties)."""
    best: dict[str, LagCorrelation] = {}
    for row in table:
        cur = best.get(row.variable)
        if cur is None or abs(row.correlation) > abs(cur.correlation):
            best[row.variable] = row
    return best
