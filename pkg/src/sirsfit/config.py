"""Flat ``key = value`` run configuration.

Values resolve in three layers: built-in defaults for the subcommand, then
the config file, then command-line overrides. A manifest JSON written by an
earlier run is also accepted as a config file; its resolved values are
replayed.
"""
from __future__ import annotations

import json
from pathlib import Path

from .model import Params


class ConfigError(ValueError):
    """Unknown key, unparsable value or inconsistent configuration."""


FLOAT_KEYS = {
    "mu", "gamma", "kappa", "d1", "d2", "d3", "omega", "beta_min", "beta_max", "T", "a", "b",
    "y0", "y1_0", "y2_0", "y3_0", "beta", "beta0", "eps", "rho", "sde_dt", "stiffness",
    "y_over_y1", "beta_lo", "beta_hi",
}
INT_KEYS = {
    "nx", "ny", "nt", "max_iter", "seed", "n_realizations", "substeps", "n_modes", "max_lag",
    "beta_steps", "refit_realizations",
}
STR_KEYS = {"spatial", "incidence", "meteo", "beta_mode", "shift", "free", "ode_fit"}
KEYS = FLOAT_KEYS | INT_KEYS | STR_KEYS
PARAM_KEYS = ("mu", "gamma", "kappa", "d1", "d2", "d3", "omega", "beta_min", "beta_max", "T")

CHOICES = {
    "beta_mode": ("time", "time-space"),
    "shift": ("daily", "monthly"),
    "ode_fit": ("constant", "time-varying", "both"),
}

# keys whose value may be left empty (meaning "use the automatic choice")
OPTIONAL = {"eps", "y2_0"}


def _param_defaults(p: Params) -> dict:
    return {k: getattr(p, k) for k in PARAM_KEYS}


def defaults(command: str) -> dict:
    """Built-in configuration of a subcommand.

    Spatial commands use the yearly rates, the seasonal ODE
    commands the monthly rates.
    """
    from .datasets import dataset_path

    common = {
        "seed": 0,
        "spatial": str(dataset_path("villages.csv")),
        "incidence": str(dataset_path("incidence.csv")),
        "meteo": str(dataset_path("meteo.csv")),
        "eps": None,
        "stiffness": 1.0,
        "rho": 1.69e-2,
        "beta_mode": "time-space",
    }
    if command in ("fit-pde", "gridfit", "stability"):
        cfg = _param_defaults(Params.yearly())
        cfg.update(nx=33, ny=33, nt=100, a=1.0, b=1.0, y1_0=200.0, y2_0=None, y3_0=3.0,
                   beta0=1.0, max_iter=200, beta=2.0, y0=203.0, n_modes=50,
                   beta_lo=0.0, beta_hi=4.0, beta_steps=41)
    elif command in ("fit-ode", "simulate-sde", "correlate"):
        cfg = _param_defaults(Params.seasonal())
        cfg.update(y1_0=1.4e6, y2_0=None, y3_0=227.0, beta=0.8823, beta0=0.8823, substeps=10,
                   free="beta,gamma,y3_0", ode_fit="both", max_iter=400, y_over_y1=1.0,
                   sde_dt=0.1, n_realizations=1000, refit_realizations=0, max_lag=30, shift="daily")
    else:
        raise ConfigError(f"unknown subcommand {command!r}")
    common.update(cfg)
    return common


def coerce(key: str, text) -> object:
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}")
    if text is None:
        return None
    if not isinstance(text, str):
        value = text
    else:
        text = text.strip()
        if text == "" or text.lower() == "auto":
            if key in OPTIONAL:
                return None
            raise ConfigError(f"{key} needs a value")
        try:
            value = float(text) if key in FLOAT_KEYS else int(text) if key in INT_KEYS else text
        except ValueError:
            raise ConfigError(f"cannot parse {key} = {text!r}") from None
    if key in FLOAT_KEYS:
        value = float(value)
    elif key in INT_KEYS:
        if float(value) != int(value):
            raise ConfigError(f"{key} must be an integer")
        value = int(value)
    if key in CHOICES and value not in CHOICES[key]:
        raise ConfigError(f"{key} must be one of {', '.join(CHOICES[key])}, got {value!r}")
    return value


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            out[key] = coerce(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{n}: {exc}") from None
    return out


def load_config_file(path, command: str | None = None) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        try:
            manifest = json.loads(text)
            values = manifest["config"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ConfigError(f"{path}: not a run manifest") from None
        if command is not None and manifest.get("command") not in (None, command):
            raise ConfigError(f"{path}: manifest is for {manifest.get('command')!r}, not {command!r}")
        return {k: coerce(k, v) for k, v in values.items()}
    return parse_config_text(text, str(path))


def resolve(command: str, file_values: dict, overrides: dict) -> dict:
    cfg = defaults(command)
    for layer in (file_values, overrides):
        for key, value in layer.items():
            cfg[key] = coerce(key, value)
    params_of(cfg)  # re-validate the model constants
    return cfg


def params_of(cfg: dict) -> Params:
    try:
        return Params(**{k: cfg[k] for k in PARAM_KEYS})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from None


def format_config(cfg: dict) -> str:
    lines = []
    for key in sorted(cfg):
        value = cfg[key]
        text = "" if value is None else repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
