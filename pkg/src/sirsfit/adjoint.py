"""Adjoint and sensitivity equations, and the gradient of the objective in beta.

The adjoint system runs backward from ``z(T) = 0``. In reversed time
``tau = T - t`` it is again a reaction-diffusion system and is stepped with
the same IMEX pattern as the state: an explicit step for the linear
reaction part (transposed Jacobian plus the tracking source), then the same
implicit diffusion solve,

    (I - dt d_i L) z^{n-1} = z^n + dt (J(y^n)^T z^n + c_n (y2^n - y2d^n) e_2),

with ``c_n`` the trapezoidal time factor (1/2 at the final time). Because the
Neumann Laplacian is self-adjoint in the trapezoidal inner product, this
backward recursion is the exact transpose of the sensitivity recursion, so
the adjoint and sensitivity routes give the same directional derivatives up
to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .model import Params, infection_term, reaction_jacobian
from .pde import DiffusionSolver, PdeSolution, broadcast_beta, space_time_inner, tracking_residual


@dataclass
class AdjointSolution:
    Z: np.ndarray

    @property
    def z1(self):
        return self.Z[0]

    @property
    def z2(self):
        return self.Z[1]

    @property
    def z3(self):
        return self.Z[2]


@dataclass
class SensitivitySolution:
    U: np.ndarray

    @property
    def u1(self):
        return self.U[0]

    @property
    def u2(self):
        return self.U[1]

    @property
    def u3(self):
        return self.U[2]


def _check_grid(grid: Grid, forward: PdeSolution):
    if grid != forward.grid:
        raise ValueError("forward solution lives on a different grid")


def solve_adjoint(grid: Grid, params: Params, forward: PdeSolution, data,
                  solver: DiffusionSolver | None = None) -> AdjointSolution:
    _check_grid(grid, forward)
    r = tracking_residual(forward, data)
    if solver is None:
        solver = DiffusionSolver(grid, params.diffusion)
    dt = grid.dt
    c = grid.time_weights / dt
    Z = np.zeros((3,) + grid.shape)
    for n in range(grid.nt, 0, -1):
        J = reaction_jacobian(forward.Y[:, n], forward.beta[n], params)
        z = Z[:, n]
        rhs = z + dt * np.einsum("ji...,j...->i...", J, z)
        rhs[1] += dt * c[n] * r[n]
        for i in range(3):
            Z[i, n - 1] = solver.solve(i, rhs[i])
        if not np.all(np.isfinite(Z[:, n - 1])):
            raise FloatingPointError(f"non-finite adjoint value at step {n - 1}")
    return AdjointSolution(Z)


def gradient_beta(forward: PdeSolution, adjoint: AdjointSolution, params: Params,
                  mode: str = "time-space") -> np.ndarray:
    """Gradient of the objective with respect to beta.

    Pointwise ``omega * beta + (y1 y2 / y) (z2 - z1)``, represented in the
    trapezoidal L2(Q) inner product: the initial slice carries half the time
    weight of the interior slices, so its reaction part is scaled by 2. In
    ``mode="time"`` the field is integrated over the domain per time step.
    """
    grid = forward.grid
    Z = adjoint.Z
    if Z.shape != forward.Y.shape:
        raise ValueError("adjoint and forward fields differ in shape")
    s = infection_term(forward.y1, forward.y2, forward.y3)
    coupling = s * (Z[1] - Z[0])
    coupling /= (grid.time_weights / grid.dt)[:, None, None]
    g = params.omega * forward.beta + coupling
    if mode == "time":
        return np.sum(g * grid.weights, axis=(-2, -1))
    if mode != "time-space":
        raise ValueError(f"unknown beta mode {mode!r}")
    return g


def solve_sensitivity(grid: Grid, params: Params, forward: PdeSolution, direction,
                      solver: DiffusionSolver | None = None) -> SensitivitySolution:
    """Derivative of the state in direction ``direction`` of beta (linearised state equations)."""
    _check_grid(grid, forward)
    h = broadcast_beta(direction, grid)
    if solver is None:
        solver = DiffusionSolver(grid, params.diffusion)
    dt = grid.dt
    U = np.zeros((3,) + grid.shape)
    for n in range(grid.nt):
        Y = forward.Y[:, n]
        J = reaction_jacobian(Y, forward.beta[n], params)
        u = U[:, n]
        s = infection_term(Y[0], Y[1], Y[2]) * h[n]
        rhs = u + dt * np.einsum("ij...,j...->i...", J, u)
        rhs[0] -= dt * s
        rhs[1] += dt * s
        for i in range(3):
            U[i, n + 1] = solver.solve(i, rhs[i])
    return SensitivitySolution(U)


def directional_derivative_sensitivity(forward: PdeSolution, sensitivity: SensitivitySolution,
                                       data, direction, params: Params) -> float:
    """``<y2 - y2d, u2>_Q + omega <beta, h>_Q`` from a sensitivity solve."""
    grid = forward.grid
    h = broadcast_beta(direction, grid)
    r = tracking_residual(forward, data)
    return space_time_inner(r, sensitivity.u2, grid) + params.omega * space_time_inner(forward.beta, h, grid)


def directional_derivative_adjoint(gradient, direction, grid: Grid) -> float:
    """``<g, h>`` in the inner product matching the gradient's representation."""
    g = np.asarray(gradient)
    h = np.asarray(direction, dtype=float)
    if g.ndim == 1:
        if h.ndim != 1:
            raise ValueError("time-only gradient needs a time-only direction")
        return float(np.sum(grid.time_weights * g * h))
    return space_time_inner(g, broadcast_beta(h, grid), grid)
