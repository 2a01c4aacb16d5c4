"""Spatially homogeneous seasonal models: deterministic SIRS, its event-based SDE,
constant-parameter fitting and the infection-rate ansatz from incidence data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .model import Params, StateTriple, infection_term, reaction
from .pde import SolverError, check_time_step

# Increments (dy1, dy2, dy3) of the seven elementary events: birth, death of a
# susceptible, infection, death of an infected, recovery, death of a
# recovered, loss of immunity.
EVENT_INCREMENTS = np.array(
    [
        [1, 0, 0],
        [-1, 0, 0],
        [-1, 1, 0],
        [0, -1, 0],
        [0, -1, 1],
        [0, 0, -1],
        [1, 0, -1],
    ],
    dtype=float,
)


def _components(state):
    if isinstance(state, StateTriple):
        return np.asarray(state.y1, float), np.asarray(state.y2, float), np.asarray(state.y3, float)
    Y = np.asarray(state, dtype=float)
    return Y[0], Y[1], Y[2]


def event_rates(state, params: Params, beta) -> np.ndarray:
    """Rates ``q_j`` of the seven events, shape ``(7,) + component_shape``."""
    y1, y2, y3 = _components(state)
    p = params
    y = y1 + y2 + y3
    return np.stack(
        np.broadcast_arrays(
            p.mu * y,
            p.mu * y1,
            beta * infection_term(y1, y2, y3),
            p.mu * y2,
            p.gamma * y2,
            p.mu * y3,
            p.kappa * y3,
        )
    )


def event_drift(state, params: Params, beta) -> np.ndarray:
    """``sum_j q_j lambda_j``; equals the reaction field."""
    q = event_rates(state, params, beta)
    # events added one at a time, skipping zero increments
    out = np.zeros((3,) + q.shape[1:])
    started = np.zeros(3, dtype=bool)
    for inc, qj in zip(EVENT_INCREMENTS, q):
        for i in np.flatnonzero(inc):
            out[i] = inc[i] * qj if not started[i] else out[i] + inc[i] * qj
            started[i] = True
    return out


def variance_matrix(state, params: Params, beta) -> np.ndarray:
    """Closed-form infinitesimal covariance ``V = sum_j q_j lambda_j lambda_j'``."""
    y1, y2, y3 = map(float, _components(state))
    p = params
    y = y1 + y2 + y3
    inf = float(beta * infection_term(y1, y2, y3))
    return np.array(
        [
            [p.mu * y + p.mu * y1 + inf + p.kappa * y3, -inf, -p.kappa * y3],
            [-inf, inf + p.mu * y2 + p.gamma * y2, -p.gamma * y2],
            [-p.kappa * y3, -p.gamma * y2, p.gamma * y2 + p.mu * y3 + p.kappa * y3],
        ]
    )


def ansatz_noise_matrix(state, params: Params, beta) -> np.ndarray:
    """3x7 factor ``G`` with ``G_ij = sqrt(q_j) lambda_j^i``, so that ``G G' = V``."""
    q = event_rates(state, params, beta)
    if np.any(q < 0):
        raise ValueError("negative event rate; state or parameters inadmissible")
    return EVENT_INCREMENTS.T * np.sqrt(q)


def _beta_schedule(beta, n: int) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 0:
        return np.full(n, float(beta))
    if beta.shape != (n,):
        raise ValueError(f"beta must be a scalar or sampled on t_grid ({n} points)")
    return beta


def _init_vector(init) -> np.ndarray:
    if isinstance(init, StateTriple):
        init = [init.y1, init.y2, init.y3]
    Y0 = np.asarray(init, dtype=float).reshape(3)
    if np.any(Y0 < 0) or not np.all(np.isfinite(Y0)):
        raise ValueError("initial state must be finite and nonnegative")
    return Y0


def _time_steps(t_grid) -> np.ndarray:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1:
        raise ValueError("t_grid must be a 1-D array")
    dts = np.diff(t_grid)
    if np.any(dts <= 0):
        raise ValueError("t_grid must be increasing")
    return dts


def ode_solve(params: Params, beta, init, t_grid) -> np.ndarray:
    """Forward-Euler trajectory of dY/dt = F(Y), shape ``(len(t_grid), 3)``.

    ``beta[n]`` drives the step from ``t_grid[n]`` to ``t_grid[n+1]``, the
    same convention as the PDE solver.
    """
    dts = _time_steps(t_grid)
    if len(dts):
        check_time_step(dts.max(), params)
    b = _beta_schedule(beta, len(dts) + 1)
    return _euler_scalar(params, b.tolist(), _init_vector(init), dts.tolist())


def _euler_scalar(p: Params, b, Y0, dts) -> np.ndarray:
    # scalar loop: same operations as model.reaction, an order of magnitude
    # faster than array calls for a single trajectory
    mu, gamma, kappa = p.mu, p.gamma, p.kappa
    y1, y2, y3 = (float(v) for v in Y0)
    out = [(y1, y2, y3)]
    for beta, dt in zip(b, dts):
        y = y1 + y2 + y3
        prod = y1 * y2
        inf = beta * (prod / y) if prod != 0 else 0.0
        f1 = mu * y - mu * y1 - inf + kappa * y3
        f2 = inf - mu * y2 - gamma * y2
        f3 = gamma * y2 - mu * y3 - kappa * y3
        y1, y2, y3 = y1 + dt * f1, y2 + dt * f2, y3 + dt * f3
        out.append((y1, y2, y3))
    return np.array(out)


@dataclass(frozen=True)
class SdeConfig:
    rho: float = 1.69e-2
    dt: float = 0.1
    seed: int = 0
    n_realizations: int = 1

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_realizations < 1:
            raise ValueError("need at least one realization")


def _sde_integrate(params: Params, beta, Y0, t_grid, rho, noise) -> np.ndarray:
    """Euler-Maruyama on a batch; ``noise`` has shape ``(steps, batch, 7)``."""
    dts = _time_steps(t_grid)
    b = _beta_schedule(beta, len(dts) + 1)
    batch = noise.shape[1]
    Y = np.empty((len(dts) + 1, batch, 3))
    Y[0] = Y0
    for n, dt in enumerate(dts):
        cur = Y[n].T
        drift = reaction(cur, b[n], params)
        q = event_rates(cur, params, b[n])
        # G xi = sum_j sqrt(q_j) xi_j lambda_j
        kicks = np.sqrt(np.maximum(q, 0.0)) * noise[n].T
        diffusion = EVENT_INCREMENTS.T @ kicks
        step = cur + dt * drift + rho * np.sqrt(dt) * diffusion
        if not np.all(np.isfinite(step)):
            raise SolverError(f"non-finite SDE state at step {n + 1}")
        Y[n + 1] = np.maximum(step, 0.0).T
    return Y


def sde_solve(params: Params, beta, init, t_grid, config: SdeConfig) -> np.ndarray:
    """One Euler-Maruyama realization of dY = F dt + rho G dW, shape ``(len(t_grid), 3)``.

    Seven independent Wiener increments are drawn per step, one per event
    channel. Negative components are clamped to zero after every step.
    """
    dts = _time_steps(t_grid)
    if len(dts):
        check_time_step(dts.max(), params)
    rng = np.random.default_rng(config.seed)
    noise = rng.standard_normal((len(dts), 7))[:, None, :]
    return _sde_integrate(params, beta, _init_vector(init), t_grid, config.rho, noise)[:, 0]


def realization_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


def sde_ensemble(params: Params, beta, init, t_grid, config: SdeConfig) -> np.ndarray:
    """``config.n_realizations`` realizations, shape ``(n_realizations, len(t_grid), 3)``.

    Realization ``k`` uses the k-th child of ``SeedSequence(config.seed)``
    and equals ``sde_solve`` run with that child as its seed.
    """
    dts = _time_steps(t_grid)
    if len(dts):
        check_time_step(dts.max(), params)
    seeds = realization_seeds(config.seed, config.n_realizations)
    noise = np.stack([np.random.default_rng(s).standard_normal((len(dts), 7)) for s in seeds], axis=1)
    Y = _sde_integrate(params, beta, _init_vector(init), t_grid, config.rho, noise)
    return np.transpose(Y, (1, 0, 2))


def model_grid(t_data, substeps: int = 10) -> np.ndarray:
    """Uniform integration grid refining the (uniform) sample times ``t_data``."""
    t_data = np.asarray(t_data, dtype=float)
    return np.linspace(t_data[0], t_data[-1], (len(t_data) - 1) * substeps + 1)


FREE_NAMES = ("beta", "gamma", "y3_0")
MAX_RECENTRES = 5
FATOL_REL = 1e-13


def _whitening_basis(residuals, x: np.ndarray) -> np.ndarray:
    """Columns spanning parameter space so that a unit step changes the residual equally.

    Built from the singular vectors of a central-difference Jacobian of the
    residual vector at ``x``. Directions the data cannot see keep a unit
    (relative) length. Only the coordinates change; the simplex itself still
    uses objective values alone.
    """
    m = len(x)
    try:
        J = np.empty((len(residuals(x)), m))
        for i in range(m):
            h = 1e-5 * max(abs(x[i]), 1.0)
            e = np.zeros(m)
            e[i] = h
            J[:, i] = (residuals(x + e) - residuals(x - e)) / (2 * h)
    except (SolverError, ValueError):
        return np.eye(m)
    if not np.all(np.isfinite(J)):
        return np.eye(m)
    _, s, Vt = np.linalg.svd(J, full_matrices=False)
    if s[0] == 0:
        return np.eye(m)
    visible = s > 1e-10 * s[0]
    s_ref = s[visible].min()
    lengths = np.where(visible, s_ref / np.where(visible, s, 1.0), 1.0)
    return Vt.T * lengths


@dataclass
class ConstantFit:
    values: dict
    residual: float
    success: bool
    degenerate: bool
    n_evaluations: int
    message: str = ""


def fit_constant_params(t_data, data, free, params: Params, beta: float, init,
                        substeps: int = 10, start=None, xatol: float = 1e-10,
                        maxiter: int = 20000) -> ConstantFit:
    """Least-squares fit of constant parameters of the seasonal SIRS model.

    Minimises ``1/2 sum_k (y2(t_k) - data_k)^2`` over the names in ``free``
    (a subset of ``beta``, ``gamma``, ``y3_0``) with the Nelder-Mead simplex;
    the others stay at ``beta``, ``params.gamma`` and ``init[2]``. The model
    is integrated with ``substeps`` forward-Euler steps per sample interval.
    Parameters are searched relative to their starting values, so the
    simplex sees a well-scaled problem.
    """
    free = tuple(free)
    if not free or any(name not in FREE_NAMES for name in free):
        raise ValueError(f"free must be a nonempty subset of {FREE_NAMES}")
    t_data = np.asarray(t_data, dtype=float)
    data = np.asarray(data, dtype=float)
    if np.any(data < 0) or not np.all(np.isfinite(data)):
        raise ValueError("data must be finite and nonnegative")
    t_grid = model_grid(t_data, substeps)
    init = _init_vector(init)
    base = {"beta": float(beta), "gamma": params.gamma, "y3_0": float(init[2])}
    x_start = np.array([base[n] if start is None else start[n] for n in free], dtype=float)
    scale = np.where(x_start != 0, np.abs(x_start), 1.0)

    def unpack(x):
        vals = dict(base)
        vals.update(zip(free, x * scale))
        return vals

    def loss(x):
        vals = unpack(x)
        if vals["beta"] < 0 or vals["gamma"] <= 0 or vals["y3_0"] < 0:
            return np.inf
        try:
            p = params.replace(gamma=vals["gamma"])
            Y = ode_solve(p, vals["beta"], [init[0], init[1], vals["y3_0"]], t_grid)
        except (SolverError, ValueError):
            return np.inf
        r = Y[::substeps, 1] - data
        return 0.5 * float(r @ r)

    x0 = x_start / scale
    # loss values below this spread count as equal; the vertex spread must
    # still fall under xatol
    f_start = loss(x0)
    fatol = FATOL_REL * f_start if np.isfinite(f_start) else 0.0
    options = dict(xatol=xatol, fatol=fatol, maxiter=maxiter, maxfev=2 * maxiter, adaptive=len(free) > 2)

    def residuals(x):
        vals = unpack(x)
        p = params.replace(gamma=vals["gamma"])
        return ode_solve(p, vals["beta"], [init[0], init[1], vals["y3_0"]], t_grid)[::substeps, 1]

    def run(x_centre):
        basis = _whitening_basis(residuals, x_centre)

        def loss_u(u):
            return loss(x_centre + basis @ u)

        simplex = np.vstack([np.zeros(len(free)), 0.1 * np.eye(len(free))])
        res = minimize(loss_u, np.zeros(len(free)), method="Nelder-Mead",
                       options=dict(options, initial_simplex=simplex))
        return x_centre + basis @ res.x, res

    x, res = run(x0)
    fun, evaluations = res.fun, res.nfev
    if not res.success:
        x, res = run(x * (1.0 + 1e-2 * np.arange(1, len(free) + 1)))
        fun, evaluations = res.fun, evaluations + res.nfev
    # re-centre the whitened coordinates until the simplex stops improving
    for _ in range(MAX_RECENTRES):
        if not res.success or not np.isfinite(fun):
            break
        x_new, res_new = run(x)
        evaluations += res_new.nfev
        improved = res_new.fun < fun - 1e-12 * abs(fun)
        if res_new.fun <= fun:
            x, fun, res = x_new, res_new.fun, res_new
        if not improved:
            break
    # flat objective around the minimiser: parameters not identifiable
    probe = [loss(x * (1 + 1e-3 * e)) for e in np.eye(len(free))]
    degenerate = bool(np.allclose(probe, fun, rtol=1e-12, atol=1e-300))
    return ConstantFit(
        values={n: unpack(x)[n] for n in free},
        residual=float(fun),
        success=bool(res.success),
        degenerate=degenerate,
        n_evaluations=int(evaluations),
        message=str(res.message),
    )


def beta_ansatz(data, t, params: Params, y_over_y1: float = 1.0) -> np.ndarray:
    """Infection rate that makes ``y2`` follow the data when ``y/y1`` is constant.

    ``(d/dt log data + gamma + mu) * y_over_y1`` with centred differences
    (one-sided at the end points).
    """
    data = np.asarray(data, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(data <= 0):
        raise ValueError("beta_ansatz needs strictly positive data")
    slope = np.gradient(data, t)
    return (slope / data + params.gamma + params.mu) * y_over_y1
