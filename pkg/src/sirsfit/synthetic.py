"""Synthetic sample data with known generating truth.

* Monthly incidence: the seasonal SIRS model's ``y2`` at fixed constants plus
  20% multiplicative noise. The noise is projected off the model's tangent
  space in ``(beta, gamma, y3_0)``, so the generating constants remain the
  least-squares optimum to first order.
* Daily weather: each variable is built from month-long blocks offset by a
  target lag, with block values whose correlation with the incidence equals a
  target value and daily fluctuations of zero block median. Monthly medians at
  the target lag then reproduce the target correlation exactly.
* Villages: Poisson counts of a drifting hotspot at 18 fixed sites, yearly.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .data.io import (
    METEO_COLUMNS,
    IncidenceSeries,
    MeteoSeries,
    ScatteredData,
    write_incidence_csv,
    write_meteo_csv,
    write_spatial_csv,
)
from .model import Params
from .ode import model_grid, ode_solve

SEASONAL_TRUTH = {"beta": 0.8823, "gamma": 0.8785, "y3_0": 227.0}
SEASONAL_Y1_0 = 1.4e6
SEASONAL_Y2_0 = 150.0
START_MONTH = (2010, 1)
N_MONTHS = 64
LOOKBACK_DAYS = 30

# variable: (lag in days, correlation with incidence at that lag)
METEO_TARGETS = {
    "dewpoint": (3, 0.4658),
    "pressure": (24, 0.1131),
    "temperature": (30, -0.1123),
    "visibility": (29, -0.2449),
    "precipitation": (3, 0.1858),
}
# variable: (base level, block spread, daily half-width)
METEO_LEVELS = {
    "dewpoint": (23.0, 1.0, 1.5),
    "pressure": (1009.0, 1.5, 2.0),
    "temperature": (27.5, 0.8, 1.2),
    "visibility": (8.0, 1.0, 1.5),
    "precipitation": (15.0, 3.0, 5.0),
    "windspeed": (5.0, 1.0, 1.5),
}

SEEDS = {"incidence": 1, "meteo": 30, "villages": 18}


def months(n: int = N_MONTHS, start: tuple[int, int] = START_MONTH) -> list[tuple[int, int]]:
    first = np.datetime64(f"{start[0]:04d}-{start[1]:02d}", "M")
    out = []
    for k in range(n):
        y, m = str(first + k).split("-")
        out.append((int(y), int(m)))
    return out


def seasonal_model_y2(theta, params: Params | None = None, substeps: int = 10) -> np.ndarray:
    """Model ``y2`` at the monthly samples for ``theta = (beta, gamma, y3_0)``."""
    p = Params.seasonal() if params is None else params
    beta, gamma, y3_0 = theta
    t = np.arange(N_MONTHS, dtype=float)
    Y = ode_solve(p.replace(gamma=gamma), beta, [SEASONAL_Y1_0, SEASONAL_Y2_0, y3_0], model_grid(t, substeps))
    return Y[::substeps, 1]


def seasonal_incidence(noise: float = 0.2, seed: int = SEEDS["incidence"]) -> IncidenceSeries:
    theta = np.array([SEASONAL_TRUTH[k] for k in ("beta", "gamma", "y3_0")])
    y2 = seasonal_model_y2(theta)
    tangent = np.empty((N_MONTHS, 3))
    for i in range(3):
        h = 1e-6 * theta[i]
        e = np.zeros(3)
        e[i] = h
        tangent[:, i] = (seasonal_model_y2(theta + e) - seasonal_model_y2(theta - e)) / (2 * h)
    rng = np.random.default_rng(seed)
    eps = noise * y2 * rng.standard_normal(N_MONTHS)
    # the first sample fixes the initial infected count and stays noise-free
    eps[0] = 0.0
    Q, _ = np.linalg.qr(tangent[1:])
    eps[1:] -= Q @ (Q.T @ eps[1:])
    cases = y2 + eps
    if cases.min() <= 0:
        raise RuntimeError("noise drove a sample nonpositive; pick another seed")
    return IncidenceSeries(np.arange(N_MONTHS, dtype=float), cases, months())


def _block_values(inc: np.ndarray, corr: float, rng) -> np.ndarray:
    """Unit-spread series with Pearson correlation exactly ``corr`` with ``inc``."""
    z = inc - inc.mean()
    z /= np.linalg.norm(z)
    # the random part is also blind to the incidence one month earlier and
    # later, so neighbouring lags do not pick up chance correlation
    n = len(inc)
    ahead, behind = np.zeros(n), np.zeros(n)
    ahead[1:], behind[:-1] = z[:-1], z[1:]
    Q, _ = np.linalg.qr(np.column_stack([np.ones(n), z, ahead, behind]))
    w = rng.standard_normal(n)
    w -= Q @ (Q.T @ w)
    w /= np.linalg.norm(w)
    c = corr * z + np.sqrt(1 - corr**2) * w
    return c * np.sqrt(len(inc))


def _zero_median(n: int, half_width: float, rng) -> np.ndarray:
    f = rng.uniform(-half_width, half_width, n)
    return f - np.median(f)


def synthetic_meteo(incidence: IncidenceSeries, seed: int = SEEDS["meteo"], n_missing: int = 4) -> MeteoSeries:
    rng = np.random.default_rng(seed)
    first = np.datetime64(f"{incidence.months[0][0]:04d}-{incidence.months[0][1]:02d}", "M")
    start = first.astype("datetime64[D]") - LOOKBACK_DAYS
    stop = (first + len(incidence)).astype("datetime64[D]")
    dates = np.arange(start, stop, dtype="datetime64[D]")
    month_start = (np.array([first + k for k in range(len(incidence) + 1)]).astype("datetime64[D]") - start).astype(int)
    values = {}
    for name in METEO_COLUMNS:
        base, spread, half_width = METEO_LEVELS[name]
        lag, corr = METEO_TARGETS.get(name, (0, 0.0))
        blocks = base + spread * _block_values(incidence.cases, corr, rng)
        series = base + spread * rng.standard_normal(len(dates))
        # days of the window not covered by a shifted month keep i.i.d. values
        for k, level in enumerate(blocks):
            a, b = month_start[k] - lag, month_start[k + 1] - lag
            series[a:b] = level + _zero_median(b - a, half_width, rng)
        values[name] = series
        if np.nanmin(series) < 0:
            raise RuntimeError(f"synthetic {name} went negative; pick another seed")
    # a few missing (NaN) windspeed readings exercise the loader's forward fill
    values["windspeed"][rng.choice(np.arange(1, len(dates)), n_missing, replace=False)] = np.nan
    return MeteoSeries(dates, values)


def village_slices(seed: int = SEEDS["villages"], n_villages: int = 18,
                   years: tuple[int, ...] = (2009, 2010, 2011, 2012, 2013, 2014)) -> list[ScatteredData]:
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.05, 0.95, (n_villages, 2))
    amplitude = rng.uniform(20.0, 60.0, len(years))
    out = []
    for k, year in enumerate(years):
        centre = np.array([0.3 + 0.08 * k, 0.6 - 0.05 * k])
        r2 = np.sum((points - centre) ** 2, axis=1)
        rate = 2.0 + amplitude[k] * np.exp(-r2 / 0.08)
        out.append(ScatteredData(points, rng.poisson(rate).astype(float), float(year)))
    return out


def write_sample_data(directory) -> dict[str, Path]:
    """Regenerate the shipped sample files into ``directory``."""
    directory = Path(directory)
    inc = seasonal_incidence()
    meteo = synthetic_meteo(inc)
    paths = {
        "incidence": directory / "incidence.csv",
        "meteo": directory / "meteo.csv",
        "villages": directory / "villages.csv",
    }
    write_incidence_csv(paths["incidence"], inc)
    write_meteo_csv(paths["meteo"], meteo)
    write_spatial_csv(paths["villages"], village_slices())
    return paths
