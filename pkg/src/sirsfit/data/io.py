"""Readers and writers for incidence, village, meteorology and field files.

Every writer goes through :func:`atomic_write_text`, so a crashed run never
leaves a half-written file behind. Numbers are written with 17 significant
digits and read back bit-for-bit.
"""
from __future__ import annotations

import csv
import datetime as dt
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..grid import Grid

METEO_COLUMNS = ("dewpoint", "pressure", "temperature", "visibility", "precipitation", "windspeed")


class DataError(ValueError):
    """Malformed or inadmissible input file."""


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        # mkstemp files are private; give the result ordinary permissions
        os.fchmod(fd, 0o666 & ~_umask())
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x: float) -> str:
    return "%.17g" % x


def _rows(path, header: tuple[str, ...]):
    """Yield ``(line_number, row)`` for a CSV whose first line must be ``header``."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(c.strip() for c in first) != header:
            raise DataError(f"{path}:1: expected header {','.join(header)}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{reader.line_num}: expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [c.strip() for c in row]


def _number(text: str, path, line: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{path}:{line}: cannot parse {what} {text!r}") from None
    if not np.isfinite(value):
        raise DataError(f"{path}:{line}: {what} is not finite")
    return value


# ---------------------------------------------------------------- incidence

@dataclass
class IncidenceSeries:
    """Monthly case counts.

    ``t`` is in months since the first sample when the file uses ISO months
    (``YYYY-MM``) and in years otherwise. ``months`` holds the calendar
    ``(year, month)`` of every sample.
    """

    t: np.ndarray
    cases: np.ndarray
    months: list[tuple[int, int]]
    unit: str = "month"

    def __len__(self) -> int:
        return len(self.cases)


def _parse_month(text: str):
    try:
        d = dt.datetime.strptime(text, "%Y-%m")
    except ValueError:
        return None
    return d.year, d.month


def load_incidence_csv(path) -> IncidenceSeries:
    times, cases, months = [], [], []
    iso = None
    for line, (t_text, c_text) in _rows(path, ("t", "cases")):
        month = _parse_month(t_text)
        if iso is None:
            iso = month is not None
        if iso:
            if month is None:
                raise DataError(f"{path}:{line}: expected an ISO month, got {t_text!r}")
            months.append(month)
            times.append(12 * (month[0] - months[0][0]) + month[1] - months[0][1])
        else:
            year = _number(t_text, path, line, "time")
            times.append(year)
            months.append((int(np.floor(year)), int(np.floor((year % 1) * 12 + 1e-9)) + 1))
        c = _number(c_text, path, line, "case count")
        if c < 0:
            raise DataError(f"{path}:{line}: negative case count {c_text}")
        cases.append(c)
    if not cases:
        raise DataError(f"{path}: no samples")
    t = np.asarray(times, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise DataError(f"{path}: times must be strictly increasing")
    return IncidenceSeries(t, np.asarray(cases), months, "month" if iso else "year")


def write_incidence_csv(path, series: IncidenceSeries) -> None:
    lines = ["t,cases"]
    for (y, m), t, c in zip(series.months, series.t, series.cases):
        label = f"{y:04d}-{m:02d}" if series.unit == "month" else fmt(t)
        lines.append(f"{label},{fmt(c)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


# ------------------------------------------------------------------ spatial

@dataclass
class ScatteredData:
    """Case counts at points of the unit square for one time label (a year)."""

    points: np.ndarray
    values: np.ndarray
    label: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(self.points) != len(self.values):
            raise ValueError("points and values differ in length")
        if np.any(self.points < 0) or np.any(self.points > 1):
            raise ValueError("points must lie in the unit square")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite and nonnegative")


def load_spatial_csv(path) -> list[ScatteredData]:
    """Village records grouped by year, in increasing year order."""
    groups: dict[float, tuple[list, list]] = {}
    for line, row in _rows(path, ("x1", "x2", "year", "cases")):
        x1, x2, year, c = (_number(v, path, line, name) for v, name in zip(row, ("x1", "x2", "year", "cases")))
        if not (0 <= x1 <= 1 and 0 <= x2 <= 1):
            raise DataError(f"{path}:{line}: coordinate ({x1}, {x2}) outside the unit square")
        if c < 0:
            raise DataError(f"{path}:{line}: negative case count {row[3]}")
        pts, vals = groups.setdefault(year, ([], []))
        pts.append((x1, x2))
        vals.append(c)
    if not groups:
        raise DataError(f"{path}: no samples")
    return [ScatteredData(np.array(p), np.array(v), year) for year, (p, v) in sorted(groups.items())]


def write_spatial_csv(path, slices: list[ScatteredData]) -> None:
    lines = ["x1,x2,year,cases"]
    for s in slices:
        label = str(int(s.label)) if float(s.label).is_integer() else fmt(s.label)
        for (x1, x2), c in zip(s.points, s.values):
            lines.append(f"{fmt(x1)},{fmt(x2)},{label},{fmt(c)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


# -------------------------------------------------------------------- meteo

@dataclass
class MeteoSeries:
    """Daily weather variables on consecutive dates.

    ``filled`` maps a variable to the file lines whose missing value was
    replaced by the previous day's value.
    """

    dates: np.ndarray
    values: dict[str, np.ndarray]
    filled: dict[str, list[int]] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    @property
    def names(self) -> list[str]:
        return list(self.values)


def load_meteo_csv(path) -> MeteoSeries:
    dates = []
    columns: dict[str, list[float]] = {name: [] for name in METEO_COLUMNS}
    filled: dict[str, list[int]] = {}
    for line, row in _rows(path, ("date",) + METEO_COLUMNS):
        try:
            dates.append(np.datetime64(dt.date.fromisoformat(row[0]), "D"))
        except ValueError:
            raise DataError(f"{path}:{line}: cannot parse date {row[0]!r}") from None
        for name, text in zip(METEO_COLUMNS, row[1:]):
            col = columns[name]
            if text == "" or text.upper() == "NA":
                if not col:
                    raise DataError(f"{path}:{line}: first value of {name} is missing")
                col.append(col[-1])
                filled.setdefault(name, []).append(line)
            else:
                col.append(_number(text, path, line, name))
    if not dates:
        raise DataError(f"{path}: no samples")
    d = np.array(dates)
    if np.any(np.diff(d) != np.timedelta64(1, "D")):
        raise DataError(f"{path}: dates must be consecutive days")
    return MeteoSeries(d, {k: np.asarray(v) for k, v in columns.items()}, filled)


def write_meteo_csv(path, meteo: MeteoSeries) -> None:
    """NaN values are written as empty (missing) fields."""
    lines = [",".join(("date",) + METEO_COLUMNS)]
    for i, day in enumerate(meteo.dates):
        lines.append(",".join([str(day)] + ["" if np.isnan(v) else fmt(v) for v in (meteo.values[n][i] for n in METEO_COLUMNS)]))
    atomic_write_text(path, "\n".join(lines) + "\n")


# -------------------------------------------------------------------- field

def write_field(path, field_values, grid: Grid) -> None:
    """Text matrix: ``nt nx ny T a b`` then ``nt + 1`` blocks of ``nx`` rows."""
    u = grid.check_field(field_values)
    lines = [f"{grid.nt} {grid.nx} {grid.ny} {fmt(grid.T)} {fmt(grid.a)} {fmt(grid.b)}"]
    for n in range(grid.nt + 1):
        lines.extend(" ".join(fmt(v) for v in row) for row in u[n])
        lines.append("")
    atomic_write_text(path, "\n".join(lines))


def read_field(path) -> tuple[Grid, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 6:
            raise DataError(f"{path}:1: expected 'nt nx ny T a b'")
        try:
            nt, nx, ny = (int(v) for v in head[:3])
            grid = Grid(nx=nx, ny=ny, nt=nt, T=float(head[3]), a=float(head[4]), b=float(head[5]))
        except ValueError as exc:
            raise DataError(f"{path}:1: bad header: {exc}") from None
        values = []
        for line_no, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != ny:
                raise DataError(f"{path}:{line_no}: expected {ny} values, got {len(parts)}")
            try:
                values.append([float(v) for v in parts])
            except ValueError:
                raise DataError(f"{path}:{line_no}: cannot parse values") from None
    u = np.asarray(values)
    if u.shape != (grid.shape[0] * nx, ny):
        raise DataError(f"{path}: expected {grid.shape[0] * nx} rows, got {len(u)}")
    return grid, u.reshape(grid.shape)
