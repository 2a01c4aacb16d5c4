import numpy as np
import pytest
from hypothesis import given, strategies as st

from sirsfit.data import load_incidence_csv
from sirsfit.datasets import dataset_path
from sirsfit.model import Params, reaction
from sirsfit.ode import (
    EVENT_INCREMENTS,
    SdeConfig,
    ansatz_noise_matrix,
    beta_ansatz,
    event_drift,
    event_rates,
    fit_constant_params,
    model_grid,
    ode_solve,
    sde_ensemble,
    sde_solve,
    variance_matrix,
)
from sirsfit.pde import SolverError

SEASONAL = Params.seasonal()
states = st.tuples(*(st.floats(0.0, 1e6) for _ in range(3)))
rates = st.tuples(st.floats(0.0, 3.0), st.floats(1e-3, 2.0), st.floats(1e-4, 0.5), st.floats(1e-3, 2.0))


def params_from(r):
    beta, gamma, mu, kappa = r
    return beta, Params(mu=mu, gamma=gamma, kappa=kappa)


def test_event_table():
    assert EVENT_INCREMENTS.tolist() == [[1, 0, 0], [-1, 0, 0], [-1, 1, 0], [0, -1, 0],
                                         [0, -1, 1], [0, 0, -1], [1, 0, -1]]
    q = event_rates([60.0, 30.0, 10.0], Params(mu=0.1, gamma=1.0, kappa=0.5), 2.0)
    assert q.tolist() == pytest.approx([10.0, 6.0, 36.0, 3.0, 30.0, 1.0, 5.0])


@given(states, rates)
def test_drift_consistency(state, r):
    beta, p = params_from(r)
    F = reaction(np.array(state), beta, p)
    assert event_drift(np.array(state), p, beta) == pytest.approx(F, rel=1e-12, abs=1e-9)


@given(states, rates)
def test_variance_factorisation(state, r):
    beta, p = params_from(r)
    V = variance_matrix(state, p, beta)
    G = ansatz_noise_matrix(np.array(state), p, beta)
    assert G.shape == (3, 7)
    q = event_rates(np.array(state), p, beta)
    table = sum(qj * np.outer(l, l) for qj, l in zip(q, EVENT_INCREMENTS))
    scale = max(1.0, np.abs(V).max())
    assert np.abs(V - table).max() <= 1e-12 * scale
    assert np.abs(G @ G.T - V).max() <= 1e-12 * scale
    assert np.linalg.eigvalsh(V).min() >= -1e-10 * scale
    s, i, rr = state
    y = s + i + rr
    expected = np.sqrt(beta * s * i / y) * np.array([-1.0, 1.0, 0.0]) if s * i > 0 else np.zeros(3)
    assert G[:, 2] == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_variance_special_states():
    p = Params(mu=0.1, gamma=1.0, kappa=0.7)
    V = variance_matrix([50.0, 0.0, 0.0], p, 2.0)
    expected = np.zeros((3, 3))
    expected[0, 0] = 0.1 * 50 + 0.1 * 50
    assert np.array_equal(V, expected)
    assert np.array_equal(ansatz_noise_matrix(np.zeros(3), p, 2.0), np.zeros((3, 7)))
    with pytest.raises(ValueError):
        ansatz_noise_matrix(np.array([-1.0, 1.0, 0.0]), p, 2.0)


def test_ode_constant_and_endemic_limit():
    p = Params(mu=0.1, gamma=1.0, kappa=0.5)
    t = np.linspace(0, 10, 101)
    assert np.all(ode_solve(p, 2.0, [100.0, 0.0, 0.0], t) == [100.0, 0.0, 0.0])
    Y = ode_solve(p, 2.0, [95.0, 5.0, 0.0], np.linspace(0, 400, 8001))
    assert Y[-1] == pytest.approx([55.0, 16.875, 28.125], rel=1e-6)


@given(st.floats(1.0, 1e6), st.floats(0.0, 1.0), st.floats(0.0, 1.0), rates)
def test_ode_conserves_total(y0, f2, f3, r):
    beta, p = params_from(r)
    init = [y0 * (1 - f2) * (1 - f3), y0 * f2, y0 * (1 - f2) * f3]
    Y = ode_solve(p, beta, init, np.linspace(0, 5, 51))
    assert np.abs(Y.sum(axis=1) / sum(init) - 1).max() <= 1e-9


def test_ode_checks():
    with pytest.raises(SolverError):
        ode_solve(SEASONAL, 0.9, [10.0, 1.0, 0.0], [0.0, 5.0])
    with pytest.raises(ValueError):
        ode_solve(SEASONAL, np.ones(3), [10.0, 1.0, 0.0], [0.0, 0.1])
    with pytest.raises(ValueError):
        ode_solve(SEASONAL, 0.9, [-1.0, 1.0, 0.0], [0.0, 0.1])


def test_seasonal_trajectory_shape():
    inc = load_incidence_csv(dataset_path("incidence.csv"))
    t = model_grid(inc.t)
    y2 = ode_solve(SEASONAL, 0.8823, [1.4e6, inc.cases[0], 227.0], t)[:, 1]
    # smooth: at most one turning point
    assert np.count_nonzero(np.diff(np.sign(np.diff(y2))) != 0) <= 1
    lo, hi = np.percentile(inc.cases, [10, 90])
    assert lo <= np.median(y2) <= hi


def test_sde_without_noise_is_ode():
    t = np.linspace(0, 20, 201)
    init = [1.4e6, 150.0, 227.0]
    ref = ode_solve(SEASONAL, 0.8823, init, t)
    Y = sde_solve(SEASONAL, 0.8823, init, t, SdeConfig(rho=0.0))
    assert np.abs(Y - ref).max() <= 1e-12 * np.abs(ref).max()


def test_sde_reproducible_and_ensemble_consistent():
    t = np.linspace(0, 10, 101)
    init = [1.4e6, 150.0, 227.0]
    cfg = SdeConfig(seed=7, n_realizations=4)
    a = sde_solve(SEASONAL, 0.8823, init, t, cfg)
    assert np.array_equal(a, sde_solve(SEASONAL, 0.8823, init, t, cfg))
    ens = sde_ensemble(SEASONAL, 0.8823, init, t, cfg)
    assert ens.shape == (4, 101, 3)
    for k, child in enumerate(np.random.SeedSequence(7).spawn(4)):
        single = sde_solve(SEASONAL, 0.8823, init, t, SdeConfig(seed=child))
        assert np.allclose(ens[k], single, rtol=1e-13, atol=0)
    assert np.all(ens >= 0)


def test_sde_config_validation():
    with pytest.raises(ValueError):
        SdeConfig(rho=-1.0)
    with pytest.raises(ValueError):
        SdeConfig(dt=0.0)


def test_constant_fit_inverse_crime():
    t = np.arange(40.0)
    truth = {"beta": 0.9, "gamma": 0.85}
    init = [1.4e6, 150.0, 227.0]
    data = ode_solve(SEASONAL.replace(gamma=truth["gamma"]), truth["beta"], init, model_grid(t))[::10, 1]
    fit = fit_constant_params(t, data, ("beta", "gamma"), SEASONAL, 0.8, init, start={"beta": 0.8, "gamma": 0.8})
    assert fit.success and not fit.degenerate
    for k, v in truth.items():
        assert fit.values[k] == pytest.approx(v, rel=1e-3)


def test_constant_fit_flat_objective_is_degenerate():
    t = np.arange(12.0)
    fit = fit_constant_params(t, np.zeros(12), ("beta",), SEASONAL, 0.9, [1000.0, 0.0, 0.0])
    assert fit.residual == 0.0 and fit.degenerate


def test_constant_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_constant_params(np.arange(3.0), np.ones(3), (), SEASONAL, 0.9, [1.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        fit_constant_params(np.arange(3.0), np.ones(3), ("kappa",), SEASONAL, 0.9, [1.0, 1.0, 0.0])


def test_constant_fit_shipped_incidence():
    inc = load_incidence_csv(dataset_path("incidence.csv"))
    init = [1.4e6, inc.cases[0], 227.0]
    fit = fit_constant_params(inc.t, inc.cases, ("beta", "gamma", "y3_0"), SEASONAL, 0.8, init,
                              start={"beta": 0.8, "gamma": 0.8, "y3_0": 200.0})
    assert fit.values["beta"] == pytest.approx(0.8823, rel=0.1)
    assert fit.values["gamma"] == pytest.approx(0.8785, rel=0.1)


def test_ansatz_examples():
    p = Params(mu=0.01, gamma=0.8, kappa=0.1)
    t = np.linspace(0, 2, 401)
    assert np.allclose(beta_ansatz(np.full(401, 7.0), t, p, 1.2), (0.8 + 0.01) * 1.2, rtol=1e-15)
    est = beta_ansatz(3 * np.exp(0.4 * t), t, p)
    h = t[1] - t[0]
    assert np.abs(est[1:-1] - 1.21).max() <= 0.4**3 * h**2
    with pytest.raises(ValueError):
        beta_ansatz(np.array([1.0, 0.0, 2.0]), t[:3], p)


@given(st.lists(st.floats(0.01, 10.0), min_size=3, max_size=30))
def test_ansatz_increasing_data(increments):
    p = Params(mu=0.01, gamma=0.8, kappa=0.1)
    data = 1.0 + np.cumsum(increments)
    est = beta_ansatz(data, np.arange(len(data), dtype=float), p)
    assert np.all(est[1:-1] > p.gamma + p.mu)
