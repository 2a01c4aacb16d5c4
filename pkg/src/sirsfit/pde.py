"""Forward solver for the reaction-diffusion SIRS system.

Time stepping is IMEX: the reaction is advanced with forward Euler and the
diffusion with backward Euler,

    (I - dt d_i L) y_i^{n+1} = y_i^n + dt f_i(y^n, beta^n),

where ``L`` is the Neumann Laplacian of :mod:`sirsfit.grid`. The three
constant-coefficient matrices are factored once per solve.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid
from .model import Params, StateTriple, reaction

NEGATIVE_TOL = 1e-9


class SolverError(RuntimeError):
    """Raised when a time integration produces an inadmissible state."""


class DiffusionSolver:
    """Backward-Euler diffusion solves ``(I - dt d L) u_new = u`` per compartment."""

    def __init__(self, grid: Grid, diffusion, dt: float | None = None):
        self.grid = grid
        dt = grid.dt if dt is None else dt
        n = grid.nx * grid.ny
        L = grid.laplacian_matrix
        self._lu = []
        for d in diffusion:
            if d == 0:
                self._lu.append(None)
            else:
                self._lu.append(spla.splu(sp.csc_matrix(sp.identity(n) - dt * d * L)))

    def solve(self, i: int, u: np.ndarray) -> np.ndarray:
        lu = self._lu[i]
        if lu is None:
            return u
        return lu.solve(u.ravel()).reshape(self.grid.slice_shape)


def broadcast_beta(beta, grid: Grid) -> np.ndarray:
    """Expand a scalar, time-only ``(nt+1,)`` or full field to shape ``grid.shape``."""
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 0:
        return np.full(grid.shape, float(beta))
    if beta.shape == (grid.nt + 1,):
        return np.broadcast_to(beta[:, None, None], grid.shape).copy()
    return grid.check_field(beta).copy()


def initial_state(init, grid: Grid) -> np.ndarray:
    """Initial compartments as an array of shape ``(3, nx, ny)``."""
    if isinstance(init, StateTriple):
        init = [init.y1, init.y2, init.y3]
    out = np.empty((3,) + grid.slice_shape)
    for i in range(3):
        out[i] = np.broadcast_to(np.asarray(init[i], dtype=float), grid.slice_shape)
    if not np.all(np.isfinite(out)) or np.any(out < 0):
        raise ValueError("initial state must be finite and nonnegative")
    return out


def check_time_step(dt: float, params: Params) -> None:
    p = params
    if not dt * (p.beta_max + p.gamma + p.mu + p.kappa) < 1:
        raise SolverError(
            f"time step {dt:g} too large for the explicit reaction step: "
            f"need dt * (beta_max + gamma + mu + kappa) < 1"
        )


@dataclass
class PdeSolution:
    grid: Grid
    params: Params
    beta: np.ndarray
    Y: np.ndarray = field(repr=False)
    clamped: int = 0

    @property
    def y1(self) -> np.ndarray:
        return self.Y[0]

    @property
    def y2(self) -> np.ndarray:
        return self.Y[1]

    @property
    def y3(self) -> np.ndarray:
        return self.Y[2]

    @property
    def total(self) -> np.ndarray:
        return self.Y.sum(axis=0)

    def mass(self) -> np.ndarray:
        """Total population integrated over the domain, per time step."""
        return np.sum(self.total * self.grid.weights, axis=(-2, -1))


def solve_forward(grid: Grid, params: Params, beta, init, solver: DiffusionSolver | None = None) -> PdeSolution:
    """Integrate the state equations on ``grid`` for the given infection rate.

    ``beta`` is a scalar, a time series of length ``nt + 1`` or a full
    space-time field. Entry ``beta[n]`` drives the step from ``t_n`` to
    ``t_{n+1}``, so the last time slice of ``beta`` does not affect the state.
    """
    p = params
    beta = broadcast_beta(beta, grid)
    tol = 1e-12 * max(1.0, p.beta_max)
    if beta.min() < p.beta_min - tol or beta.max() > p.beta_max + tol:
        raise ValueError(f"beta leaves the box [{p.beta_min}, {p.beta_max}]")
    check_time_step(grid.dt, p)
    if solver is None:
        solver = DiffusionSolver(grid, p.diffusion)
    dt = grid.dt

    Y = np.empty((3,) + grid.shape)
    Y[:, 0] = initial_state(init, grid)
    scale = max(float(Y[:, 0].sum(axis=0).max()), 1.0)
    clamped = 0
    for n in range(grid.nt):
        rhs = Y[:, n] + dt * reaction(Y[:, n], beta[n], p)
        for i in range(3):
            Y[i, n + 1] = solver.solve(i, rhs[i])
        step = Y[:, n + 1]
        if not np.all(np.isfinite(step)):
            bad = np.argwhere(~np.isfinite(step))[0]
            raise SolverError(f"non-finite value at step {n + 1}, compartment {bad[0] + 1}, node {tuple(bad[1:])}")
        low = step.min()
        if low < 0:
            if low < -NEGATIVE_TOL * scale:
                bad = np.unravel_index(np.argmin(step), step.shape)
                raise SolverError(
                    f"negative density {low:g} at step {n + 1}, compartment {bad[0] + 1}, node {bad[1:]}"
                )
            clamped += int(np.count_nonzero(step < 0))
            np.maximum(step, 0.0, out=step)
    return PdeSolution(grid, p, beta, Y, clamped)


def tracking_residual(solution: PdeSolution, data) -> np.ndarray:
    data = solution.grid.check_field(data)
    return solution.y2 - data


def objective(solution: PdeSolution, data, omega: float | None = None) -> float:
    """Tracking-plus-penalty functional with trapezoidal quadrature in space and time.

    ``J = 1/2 int int (y2 - data)^2 + omega/2 int int beta^2``.
    """
    grid = solution.grid
    omega = solution.params.omega if omega is None else omega
    r = tracking_residual(solution, data)
    w = grid.time_weights[:, None, None] * grid.weights
    return 0.5 * float(np.sum(w * r * r)) + 0.5 * omega * float(np.sum(w * solution.beta**2))


def space_time_inner(u, v, grid: Grid) -> float:
    """Trapezoidal L2(Q) inner product of two space-time fields."""
    w = grid.time_weights[:, None, None] * grid.weights
    return float(np.sum(w * np.asarray(u) * np.asarray(v)))
