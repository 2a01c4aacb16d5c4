"""Reaction kinetics of the SIRS model: parameters, vector field, Jacobian, equilibria."""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Params:
    """Scalar model constants.

    Rates are per unit time (the caller picks the unit: months for the
    seasonal models, years for the PDE). ``d1, d2, d3`` are diffusion
    coefficients of the three compartments, ``omega`` the weight of the
    ``beta**2`` penalty in the fitting objective.
    """

    mu: float
    gamma: float
    kappa: float
    d1: float = 0.0
    d2: float = 0.0
    d3: float = 0.0
    omega: float = 1e-3
    beta_min: float = 0.0
    beta_max: float = 4.0
    T: float = 1.0

    def __post_init__(self):
        for name in ("mu", "gamma", "kappa", "omega", "T"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("d1", "d2", "d3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if not 0 <= self.beta_min <= self.beta_max:
            raise ValueError(
                f"need 0 <= beta_min <= beta_max, got [{self.beta_min}, {self.beta_max}]"
            )

    @property
    def diffusion(self) -> np.ndarray:
        return np.array([self.d1, self.d2, self.d3])

    def replace(self, **changes) -> "Params":
        return dataclasses.replace(self, **changes)

    @classmethod
    def yearly(cls, **overrides) -> "Params":
        """Yearly-unit parameters of the spatial village experiment.

        1/mu = 65 y, 1/gamma = 0.879/12 y, 1/kappa = 9/12 y, 1/d = 200 y with
        d1 = d3 = d and d2 = 0.2 d, beta in [0, 4], omega = 1e-3. The horizon
        covers the yearly data 2009..2014.
        """
        d = 5.0 / 1e3
        values = dict(
            mu=1.0 / 65.0,
            gamma=12.0 / 0.879,
            kappa=12.0 / 9.0,
            d1=d,
            d2=0.2 * d,
            d3=d,
            omega=1e-3,
            beta_min=0.0,
            beta_max=4.0,
            T=5.0,
        )
        values.update(overrides)
        return cls(**values)

    @classmethod
    def seasonal(cls, **overrides) -> "Params":
        """Monthly-unit parameters of the seasonal (spatially homogeneous) models."""
        values = dict(
            mu=1.0 / (65.0 * 12.0),
            gamma=0.8785,
            kappa=1.0 / 9.0,
            omega=1e-3,
            beta_min=0.0,
            beta_max=4.0,
            T=64.0,
        )
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class StateTriple:
    """Compartment densities (susceptible, infected, recovered).

    Components may be scalars or equally shaped arrays (a time slice or a
    trajectory).
    """

    y1: float | np.ndarray
    y2: float | np.ndarray
    y3: float | np.ndarray

    def __post_init__(self):
        for name in ("y1", "y2", "y3"):
            value = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name} contains non-finite values")
            if np.any(value < 0):
                raise ValueError(f"{name} must be nonnegative")

    @property
    def y(self):
        return self.y1 + self.y2 + self.y3

    def as_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(*map(np.asarray, (self.y1, self.y2, self.y3)))).astype(float)

    @classmethod
    def from_array(cls, Y) -> "StateTriple":
        Y = np.asarray(Y, dtype=float)
        return cls(Y[0], Y[1], Y[2])


def _as_components(state):
    if isinstance(state, StateTriple):
        return np.asarray(state.y1, float), np.asarray(state.y2, float), np.asarray(state.y3, float)
    Y = np.asarray(state, dtype=float)
    if Y.shape[0] != 3:
        raise ValueError(f"state needs a leading axis of length 3, got shape {Y.shape}")
    return Y[0], Y[1], Y[2]


def _safe_ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.broadcast_to(np.asarray(den, dtype=float), num.shape)
    out = np.zeros(num.shape)
    np.divide(num, den, out=out, where=den != 0)
    return out


def infection_term(y1, y2, y3, total=None):
    """``y1*y2/y``, extended by zero wherever ``y1*y2 == 0``."""
    y = y1 + y2 + y3 if total is None else total
    prod = y1 * y2
    return _safe_ratio(prod, np.where(prod == 0, 0.0, y))


def reaction(state, beta, params: Params, total=None) -> np.ndarray:
    """Reaction vector field F(Y) of the SIRS kinetics.

    ``state`` is a :class:`StateTriple` or an array with leading axis 3; the
    result has the same shape. ``beta`` broadcasts against the component
    shape. With ``total=None`` the total population is the local sum
    ``y1 + y2 + y3``; passing a value freezes it (the convention used for the
    equilibrium Jacobians in the stability analysis).
    """
    y1, y2, y3 = _as_components(state)
    p = params
    y = y1 + y2 + y3 if total is None else total
    inf = beta * infection_term(y1, y2, y3, total)
    # terms in event-table order, so the event drift matches bit for bit
    f1 = p.mu * y - p.mu * y1 - inf + p.kappa * y3
    f2 = inf - p.mu * y2 - p.gamma * y2
    f3 = p.gamma * y2 - p.mu * y3 - p.kappa * y3
    return np.stack(np.broadcast_arrays(f1, f2, f3))


def infection_partials(y1, y2, y3, frozen_total=False):
    """Partial derivatives of ``y1*y2/y`` with respect to (y1, y2, y3)."""
    y = y1 + y2 + y3
    if frozen_total:
        return _safe_ratio(y2, y), _safe_ratio(y1, y), np.zeros(np.shape(y))
    y_sq = y * y
    return (
        _safe_ratio(y2 * (y2 + y3), y_sq),
        _safe_ratio(y1 * (y1 + y3), y_sq),
        -_safe_ratio(y1 * y2, y_sq),
    )


def reaction_jacobian(state, beta, params: Params, frozen_total=False) -> np.ndarray:
    """Jacobian dF/dY with shape ``(3, 3) + component_shape``.

    By default the total population is differentiated as ``y1 + y2 + y3``,
    so every column sums to zero. ``frozen_total=True`` holds ``y`` fixed,
    which reproduces the classical equilibrium Jacobians (eigenvalues
    ``-mu, beta-gamma-mu, -kappa-mu`` at the disease-free state).
    """
    y1, y2, y3 = _as_components(state)
    p = params
    s1, s2, s3 = infection_partials(y1, y2, y3, frozen_total)
    shape = np.broadcast(y1, y2, y3, beta).shape
    J = np.zeros((3, 3) + shape)
    if frozen_total:
        J[0, 0] = -p.mu - beta * s1
        J[0, 1] = -beta * s2
        J[0, 2] = p.kappa
    else:
        J[0, 0] = -beta * s1
        J[0, 1] = p.mu - beta * s2
        J[0, 2] = p.mu + p.kappa - beta * s3
    J[1, 0] = beta * s1
    J[1, 1] = beta * s2 - p.gamma - p.mu
    J[1, 2] = beta * s3
    J[2, 1] = p.gamma
    J[2, 2] = -p.kappa - p.mu
    return J


def basic_reproductive_number(params: Params, beta: float) -> float:
    return beta / (params.gamma + params.mu)


class EquilibriumKind(enum.Enum):
    DISEASE_FREE = "disease-free"
    ENDEMIC = "endemic"


@dataclass(frozen=True)
class Equilibrium:
    kind: EquilibriumKind
    state: StateTriple
    r0: float

    def __post_init__(self):
        if self.kind is EquilibriumKind.DISEASE_FREE:
            if self.state.y2 != 0 or self.state.y3 != 0:
                raise ValueError("disease-free equilibrium must have y2 = y3 = 0")
        elif not self.r0 > 1:
            raise ValueError(f"endemic equilibrium requires r0 > 1, got r0 = {self.r0}")


def disease_free_equilibrium(params: Params, beta: float, y0: float) -> Equilibrium:
    r0 = basic_reproductive_number(params, beta)
    return Equilibrium(EquilibriumKind.DISEASE_FREE, StateTriple(float(y0), 0.0, 0.0), r0)


def endemic_equilibrium(params: Params, beta: float, y0: float) -> Equilibrium:
    p = params
    r0 = basic_reproductive_number(p, beta)
    if not r0 > 1:
        raise ValueError(f"endemic equilibrium requires r0 > 1, got r0 = {r0}")
    excess = beta - p.gamma - p.mu
    rest = p.gamma + p.mu + p.kappa
    y1 = y0 * (p.gamma + p.mu) / beta
    y2 = y0 * (p.kappa + p.mu) * excess / (beta * rest)
    # closing the sum on y3 keeps y1 + y2 + y3 == y0 to rounding
    y3 = y0 - y1 - y2
    return Equilibrium(EquilibriumKind.ENDEMIC, StateTriple(y1, y2, y3), r0)


def equilibria(params: Params, beta: float, y0: float) -> list[Equilibrium]:
    """Disease-free equilibrium, plus the endemic one when ``r0 > 1``."""
    if not y0 > 0:
        raise ValueError("y0 must be positive")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    found = [disease_free_equilibrium(params, beta, y0)]
    if basic_reproductive_number(params, beta) > 1:
        found.append(endemic_equilibrium(params, beta, y0))
    return found
