import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sirsfit.grid import Grid
from sirsfit.model import Params, endemic_equilibrium
from sirsfit.ode import ode_solve
from sirsfit.optimize import (
    StopReason,
    fit_ode_time_varying,
    fit_pde,
    project_box,
    projected_gradient,
    quadratic_step,
)
from sirsfit.pde import solve_forward

P = Params(mu=0.02, gamma=1.0, kappa=0.5, d1=0.01, d2=0.005, d3=0.01, omega=1e-6, T=2.0)
G = Grid(7, 7, 20, T=2.0)


def init_for(grid):
    X1, X2 = grid.mesh()
    b = np.exp(-10 * ((X1 - 0.3) ** 2 + (X2 - 0.4) ** 2))
    return [100 - 5 * b, 5 + 5 * b, np.full(grid.slice_shape, 2.0)]


def test_project_box():
    beta = np.array([-1.0, 0.5, 7.0])
    assert np.array_equal(project_box(beta, 0, 4), [0.0, 0.5, 4.0])
    assert np.array_equal(project_box(np.full(3, 7.0), 0, 4), np.full(3, 4.0))
    inside = np.array([0.0, 1.0, 4.0])
    assert np.array_equal(project_box(inside, 0, 4), inside)
    with pytest.raises(ValueError):
        project_box(beta, 1, 0)


@given(arrays(float, 10, elements=st.floats(-1e3, 1e3)))
def test_projection_idempotent(beta):
    once = project_box(beta, 0.0, 4.0)
    assert np.array_equal(project_box(once, 0.0, 4.0), once)
    assert np.all((once >= 0) & (once <= 4))


def test_quadratic_step_examples():
    # phi(d) = (d - 1)^2
    assert quadratic_step(1.0, -2.0, 2.0, 1.0) == pytest.approx(1.0)
    assert quadratic_step(1.0, -2.0, 2.0, 1.0 - 4.0) == 1.0
    with pytest.raises(ValueError):
        quadratic_step(1.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        quadratic_step(1.0, -1.0, 0.0, 1.0)


@given(phi0=st.floats(-10, 10), dphi0=st.floats(-10, -1e-3), delta0=st.floats(1e-3, 10),
       curv=st.floats(1e-3, 100), scale=st.floats(1e-3, 1e3))
def test_quadratic_step_clip_and_homogeneity(phi0, dphi0, delta0, curv, scale):
    phid = phi0 + dphi0 * delta0 + curv * delta0**2
    d1 = quadratic_step(phi0, dphi0, delta0, phid)
    assert 0.1 * delta0 * (1 - 1e-12) <= d1 <= 0.9 * delta0 * (1 + 1e-12)
    assert quadratic_step(scale * phi0, scale * dphi0, delta0, scale * phid) == pytest.approx(d1, rel=1e-9)


def test_projected_gradient_on_quadratic():
    # J(b) = 1/2 |b - t|^2 with t partly outside the box [0, 1]
    target = np.array([0.3, 1.7, -0.4, 0.8])

    def value(b):
        return 0.5 * float(np.sum((b - target) ** 2)), None

    rep = projected_gradient(value, lambda b, s: b - target, lambda u, v: float(u @ v), np.full(4, 0.5), 0.0, 1.0,
                             eps=1e-14, max_iter=500)
    assert rep.final_beta == pytest.approx(np.clip(target, 0, 1), abs=1e-6)
    assert rep.projected_gradient_norm <= 1e-6
    assert np.all(np.diff(rep.J) < 0)


def test_fit_from_matching_data_stops_quickly():
    grid = G
    beta0 = np.full(grid.shape, 1.2)
    sol = solve_forward(grid, P, beta0, init_for(grid))
    rep = fit_pde(grid, P, sol.y2, beta0, init_for(grid))
    assert len(rep.iterations) - 1 <= 2 and rep.converged
    assert rep.J[0] == pytest.approx(0.5 * P.omega * 1.2**2 * grid.T, rel=1e-12)


def test_fit_respects_bounds_and_descends():
    grid = G
    p = P.replace(omega=1e-3, beta_max=4.0)
    data = 3 * solve_forward(grid, p, 2.0, init_for(grid)).y2
    rep = fit_pde(grid, p, data, np.full(grid.shape, 1.0), init_for(grid), max_iter=40)
    assert rep.final_beta.max() <= 4.0 and rep.final_beta.min() >= 0.0
    assert np.all(np.diff(rep.J) < 0)
    assert rep.final_beta.max() == 4.0


def test_callback_and_trace(tmp_path):
    seen = []
    grid = G
    data = solve_forward(grid, P, 1.5, init_for(grid)).y2
    rep = fit_pde(grid, P, data, np.full(grid.shape, 0.5), init_for(grid), max_iter=5,
                  callback=lambda rec, beta: seen.append(rec.iteration))
    assert seen == list(range(6)) and rep.stop_reason is StopReason.MAX_ITERATIONS and not rep.converged
    rep.write_trace(tmp_path / "trace.csv")
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0] == "iteration,J,delta,grad_norm" and len(lines) == 7
    assert float(lines[3].split(",")[1]) == rep.J[2]


def test_time_mode_fit():
    grid = G
    data = solve_forward(grid, P, 1.5, init_for(grid)).y2
    rep = fit_pde(grid, P, data, np.full(grid.nt + 1, 0.5), init_for(grid), eps=0.0, max_iter=1000)
    assert rep.final_beta.shape == (grid.nt + 1,)
    assert np.max(np.abs(rep.final_beta[:-1] - 1.5)) <= 0.05


def test_beta0_shape_checked():
    with pytest.raises(ValueError):
        fit_pde(G, P, np.zeros(G.shape), np.zeros(5), init_for(G))


def test_large_omega_drives_beta_to_lower_bound():
    grid = Grid(5, 5, 20, T=2.0)
    p = P.replace(omega=1e4, beta_min=0.2)
    data = solve_forward(grid, p, 1.5, init_for(grid)).y2
    rep = fit_pde(grid, p, data, np.full(grid.shape, 1.5), init_for(grid), eps=0.0, max_iter=100)
    assert np.max(np.abs(rep.final_beta - 0.2)) <= 1e-6


def test_ode_huge_eps_single_iteration():
    p = P.replace(d1=0.0, d2=0.0, d3=0.0)
    t = np.linspace(0, 2, 21)
    data = ode_solve(p, 1.5, [95.0, 5.0, 0.0], t)[:, 1]
    rep = fit_ode_time_varying(p, data, 0.5, [95.0, 5.0, 0.0], t, eps=1e9)
    assert len(rep.iterations) == 2 and rep.converged


def test_ode_sinusoidal_recovery():
    p = Params(mu=0.02, gamma=1.0, kappa=0.5, omega=1e-8, T=4.0)
    t = np.linspace(0, 4, 41)
    beta_true = 1.5 + 0.5 * np.sin(2 * np.pi * t / 4)
    init = [95.0, 5.0, 0.0]
    Y = ode_solve(p, beta_true, init, t)
    rep = fit_ode_time_varying(p, Y[:, 1], 1.0, init, t, eps=0.0, max_iter=3000, delta0=1.0)
    support = Y[:-1, 1] > 0.01 * Y[:, 1].max()
    rel = np.abs(rep.final_beta[:-1] - beta_true[:-1]) / beta_true[:-1]
    assert np.max(rel[support]) <= 0.05


def test_ode_endemic_consistency():
    p = Params(mu=0.1, gamma=1.0, kappa=0.5, omega=1e-8, T=10.0)
    eq = endemic_equilibrium(p, 2.0, 100.0).state
    t = np.linspace(0, 10, 101)
    data = np.full(len(t), eq.y2)
    rep = fit_ode_time_varying(p, data, 1.0, [eq.y1, eq.y2, eq.y3], t, eps=0.0, max_iter=2000, delta0=1.0)
    assert np.max(np.abs(rep.final_beta[20:-1] - 2.0)) <= 0.02
