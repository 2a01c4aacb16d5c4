"""Shipped sample data (synthetic stand-ins, see :mod:`sirsfit.synthetic`) and configs."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

FILES = ("incidence.csv", "meteo.csv", "villages.csv", "spatial.cfg", "seasonal.cfg")


def dataset_path(name: str) -> Path:
    if name not in FILES:
        raise KeyError(f"unknown dataset {name!r}; available: {', '.join(FILES)}")
    return Path(str(resources.files(__name__).joinpath(name)))
