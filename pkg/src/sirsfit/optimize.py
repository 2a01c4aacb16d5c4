"""Projected gradient descent for the infection rate, with quadratic step reduction."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .adjoint import gradient_beta, solve_adjoint
from .grid import Grid
from .model import Params
from .pde import DiffusionSolver, PdeSolution, objective, solve_forward

MIN_STEP = 1e-12


class StopReason(enum.Enum):
    TOLERANCE_MET = "tolerance-met"
    MAX_ITERATIONS = "max-iterations"
    LINE_SEARCH_STALL = "line-search-stall"


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    J: float
    delta: float
    grad_norm: float


@dataclass
class FitReport:
    iterations: list[IterationRecord]
    final_beta: np.ndarray
    final_solution: PdeSolution
    converged: bool
    stop_reason: StopReason
    final_gradient: np.ndarray = field(repr=False)
    projected_gradient_norm: float = float("nan")

    @property
    def J(self) -> np.ndarray:
        return np.array([rec.J for rec in self.iterations])

    @property
    def final_J(self) -> float:
        return self.iterations[-1].J

    @property
    def trajectory(self) -> np.ndarray:
        """Spatially averaged compartments, shape ``(nt + 1, 3)``."""
        sol = self.final_solution
        return (np.sum(sol.Y * sol.grid.weights, axis=(-2, -1)) / (sol.grid.a * sol.grid.b)).T

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "J", "delta", "grad_norm"])
            for rec in self.iterations:
                writer.writerow([rec.iteration, repr(rec.J), repr(rec.delta), repr(rec.grad_norm)])


def project_box(beta, lo: float, hi: float) -> np.ndarray:
    """Pointwise clamp onto ``[lo, hi]`` (the L2 projection onto the box)."""
    if lo > hi:
        raise ValueError(f"empty box: lo={lo} > hi={hi}")
    return np.clip(np.asarray(beta, dtype=float), lo, hi)


def quadratic_step(phi0: float, dphi0: float, delta0: float, phi_delta0: float) -> float:
    """Minimiser of the quadratic through phi(0), phi'(0) and phi(delta0).

    The result is clipped into ``[0.1, 0.9] * delta0``; without positive
    curvature the step is halved.
    """
    if not dphi0 < 0:
        raise ValueError(f"not a descent direction: phi'(0) = {dphi0}")
    if not delta0 > 0:
        raise ValueError("delta0 must be positive")
    curvature = phi_delta0 - phi0 - dphi0 * delta0
    if not curvature > 0 or not np.isfinite(curvature):
        return 0.5 * delta0
    delta1 = -dphi0 * delta0**2 / (2.0 * curvature)
    return float(np.clip(delta1, 0.1 * delta0, 0.9 * delta0))


def projected_gradient(value, gradient, inner, beta0, lo, hi, eps=None, max_iter=200,
                       delta0=None, callback=None) -> FitReport:
    """Generic projected gradient loop.

    ``value(beta) -> (J, state)`` runs the forward model, ``gradient(beta,
    state) -> g`` the adjoint, and ``inner`` is the inner product in which
    ``g`` is the gradient. ``eps`` defaults to ``1e-6 * J(beta0)``; the loop
    stops once an accepted step changes J by less than ``eps``.
    """
    beta = project_box(beta0, lo, hi)
    J, state = value(beta)
    g = gradient(beta, state)
    if eps is None:
        eps = 1e-6 * J
    if delta0 is None:
        delta0 = 1.0 / (float(np.max(np.abs(g))) + 1.0)
    records = [IterationRecord(0, J, 0.0, float(np.sqrt(inner(g, g))))]
    if callback is not None:
        callback(records[-1], beta)

    stop = StopReason.TOLERANCE_MET
    dJ = eps + 1.0
    n = 0
    while abs(dJ) >= eps:
        if n >= max_iter:
            stop = StopReason.MAX_ITERATIONS
            break
        # components pushing against an active bound do not move
        free = ~(((beta <= lo) & (g > 0)) | ((beta >= hi) & (g < 0)))
        dphi0 = -inner(np.where(free, g, 0.0), g)
        if not dphi0 < 0:
            break
        delta = delta0
        trial = project_box(beta - delta * g, lo, hi)
        J_trial, state_trial = value(trial)
        dJ = J_trial - J
        while not dJ < 0:
            delta = quadratic_step(J, dphi0, delta, J_trial)
            if delta < MIN_STEP:
                stop = StopReason.LINE_SEARCH_STALL
                break
            trial = project_box(beta - delta * g, lo, hi)
            J_trial, state_trial = value(trial)
            dJ = J_trial - J
        if stop is StopReason.LINE_SEARCH_STALL:
            break
        delta0 = delta
        beta, J, state = trial, J_trial, state_trial
        g = gradient(beta, state)
        n += 1
        records.append(IterationRecord(n, J, delta, float(np.sqrt(inner(g, g)))))
        if callback is not None:
            callback(records[-1], beta)

    residual = beta - project_box(beta - g, lo, hi)
    return FitReport(
        iterations=records,
        final_beta=beta,
        final_solution=state,
        converged=stop is StopReason.TOLERANCE_MET,
        stop_reason=stop,
        final_gradient=g,
        projected_gradient_norm=float(np.sqrt(inner(residual, residual))),
    )


def beta_mode(beta0, grid: Grid) -> str:
    beta0 = np.asarray(beta0)
    if beta0.shape == (grid.nt + 1,):
        return "time"
    if beta0.shape == grid.shape:
        return "time-space"
    raise ValueError(f"beta0 must have shape {(grid.nt + 1,)} or {grid.shape}, got {beta0.shape}")


def fit_pde(grid: Grid, params: Params, data, beta0, init, eps=None, max_iter=200,
            delta0=None, callback=None) -> FitReport:
    """Fit the infection rate of the reaction-diffusion model to infected-density data.

    ``beta0`` of shape ``(nt + 1,)`` estimates a time-only rate shared by the
    whole domain; shape ``grid.shape`` estimates a space-time field.
    """
    data = grid.check_field(data)
    mode = beta_mode(beta0, grid)
    solver = DiffusionSolver(grid, params.diffusion)

    def value(beta):
        sol = solve_forward(grid, params, beta, init, solver=solver)
        return objective(sol, data), sol

    def gradient(beta, sol):
        adj = solve_adjoint(grid, params, sol, data, solver=solver)
        return gradient_beta(sol, adj, params, mode=mode)

    if mode == "time":
        def inner(u, v):
            return float(np.sum(grid.time_weights * u * v))
    else:
        w = grid.time_weights[:, None, None] * grid.weights

        def inner(u, v):
            return float(np.sum(w * u * v))

    return projected_gradient(value, gradient, inner, np.asarray(beta0, dtype=float),
                              params.beta_min, params.beta_max, eps=eps, max_iter=max_iter,
                              delta0=delta0, callback=callback)


def homogeneous_grid(t_grid) -> Grid:
    """Two-by-two unit-square grid standing in for a spatially homogeneous model."""
    t_grid = np.asarray(t_grid, dtype=float)
    steps = np.diff(t_grid)
    if t_grid.ndim != 1 or len(t_grid) < 2 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise ValueError("t_grid must be uniform with at least two points")
    return Grid(nx=2, ny=2, nt=len(t_grid) - 1, T=float(t_grid[-1] - t_grid[0]))


def fit_ode_time_varying(params: Params, data, beta0, init, t_grid, eps=None, max_iter=200,
                         delta0=None, callback=None) -> FitReport:
    """Fit a time-varying infection rate of the spatially homogeneous model.

    ``data`` and ``beta0`` are sampled on the uniform ``t_grid``; ``init`` is
    the initial ``(y1, y2, y3)``. The problem is solved as the PDE fit on a
    uniform 2x2 grid of the unit square with diffusion switched off, which
    reduces every spatial integral to the point value.
    """
    grid = homogeneous_grid(t_grid)
    data = np.asarray(data, dtype=float)
    if data.shape != (grid.nt + 1,):
        raise ValueError("data must be sampled on t_grid")
    beta0 = np.broadcast_to(np.asarray(beta0, dtype=float), (grid.nt + 1,)).copy()
    field_data = np.broadcast_to(data[:, None, None], grid.shape).copy()
    flat = params.replace(d1=0.0, d2=0.0, d3=0.0)
    return fit_pde(grid, flat, field_data, beta0, [float(v) for v in init], eps=eps,
                   max_iter=max_iter, delta0=delta0, callback=callback)
