"""Input files, lagged weather correlation and scattered-data surface fitting."""
from .gridfit import fit_field, gridfit, gridfit_raw
from .io import (
    DataError,
    IncidenceSeries,
    MeteoSeries,
    ScatteredData,
    load_incidence_csv,
    load_meteo_csv,
    load_spatial_csv,
    read_field,
    write_field,
)
from .lagcorr import LagCorrelation, best_lags, lagged_correlations

__all__ = [
    "DataError",
    "IncidenceSeries",
    "LagCorrelation",
    "MeteoSeries",
    "ScatteredData",
    "best_lags",
    "fit_field",
    "gridfit",
    "gridfit_raw",
    "lagged_correlations",
    "load_incidence_csv",
    "load_meteo_csv",
    "load_spatial_csv",
    "read_field",
    "write_field",
]
