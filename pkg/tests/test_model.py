import numpy as np
import pytest
from hypothesis import given, strategies as st

from sirsfit.model import (
    Equilibrium,
    EquilibriumKind,
    Params,
    StateTriple,
    basic_reproductive_number,
    endemic_equilibrium,
    equilibria,
    infection_term,
    reaction,
    reaction_jacobian,
)

P = Params(mu=0.1, gamma=1.0, kappa=0.5)

rates = st.floats(0.01, 5.0)
densities = st.floats(0.0, 1e4)
positive_densities = st.floats(1.0, 1e4)


def test_params_validation():
    with pytest.raises(ValueError):
        Params(mu=0.0, gamma=1.0, kappa=0.5)
    with pytest.raises(ValueError):
        Params(mu=0.1, gamma=1.0, kappa=0.5, d2=-1e-3)
    with pytest.raises(ValueError):
        Params(mu=0.1, gamma=1.0, kappa=0.5, beta_min=2.0, beta_max=1.0)
    with pytest.raises(ValueError):
        Params(mu=0.1, gamma=1.0, kappa=0.5, omega=0.0)


def test_yearly_values():
    p = Params.yearly()
    assert p.mu == pytest.approx(1 / 65)
    assert p.gamma == pytest.approx(12 / 0.879)
    assert p.kappa == pytest.approx(12 / 9)
    assert (p.d1, p.d2, p.d3) == pytest.approx((1 / 200, 0.2 / 200, 1 / 200))
    assert (p.beta_min, p.beta_max, p.omega) == (0.0, 4.0, 1e-3)


def test_seasonal_values():
    p = Params.seasonal()
    assert p.mu == pytest.approx(1 / 780)
    assert p.kappa == pytest.approx(1 / 9)
    assert p.gamma == 0.8785


def test_state_triple_rejects_negative():
    with pytest.raises(ValueError):
        StateTriple(1.0, -1e-3, 0.0)
    assert StateTriple(1.0, 2.0, 3.0).y == 6.0


def test_reaction_zero_state():
    assert np.array_equal(reaction(StateTriple(0.0, 0.0, 0.0), 1.0, P), np.zeros(3))


def test_disease_free_fixed_point():
    assert np.array_equal(reaction(StateTriple(100.0, 0.0, 0.0), 2.0, P), np.zeros(3))


def test_endemic_residual_closed_form():
    # closed form for beta=2, gamma=1, mu=0.1, kappa=0.5, y0=100
    f = reaction(StateTriple(55.0, 16.875, 28.125), 2.0, P)
    assert np.max(np.abs(f)) <= 1e-12


def test_infection_term_zero_extension():
    assert infection_term(np.array(0.0), np.array(5.0), np.array(1.0)) == 0
    assert infection_term(np.array(3.0), np.array(0.0), np.array(0.0)) == 0


@given(y1=densities, y2=densities, y3=densities, beta=st.floats(0, 4), mu=rates, gamma=rates, kappa=rates)
def test_mass_neutrality(y1, y2, y3, beta, mu, gamma, kappa):
    p = Params(mu=mu, gamma=gamma, kappa=kappa)
    f = reaction(StateTriple(y1, y2, y3), beta, p)
    assert abs(f.sum()) <= 1e-12 * max(1.0, np.abs(f).max(), y1 + y2 + y3)


@pytest.mark.parametrize("frozen", [False, True])
@given(y1=positive_densities, y2=positive_densities, y3=positive_densities, beta=st.floats(0.1, 4))
def test_jacobian_matches_finite_differences(frozen, y1, y2, y3, beta):
    Y = np.array([y1, y2, y3])
    total = Y.sum() if frozen else None
    J = reaction_jacobian(Y, beta, P, frozen_total=frozen)
    fd = np.empty((3, 3))
    for j in range(3):
        h = 1e-5 * Y.max()
        e = np.zeros(3)
        e[j] = h
        fd[:, j] = (reaction(Y + e, beta, P, total) - reaction(Y - e, beta, P, total)) / (2 * h)
    scale = np.abs(J).max()
    assert np.max(np.abs(J - fd)) <= 1e-6 * scale


@given(y1=densities, y2=densities, y3=densities, beta=st.floats(0, 4))
def test_jacobian_columns_sum_to_zero(y1, y2, y3, beta):
    J = reaction_jacobian(np.array([y1, y2, y3]), beta, P)
    assert np.max(np.abs(J.sum(axis=0))) <= 1e-12 * max(1.0, np.abs(J).max())


def test_frozen_jacobian_dfe_eigenvalues():
    p = Params(mu=0.1, gamma=1.0, kappa=0.5)
    J = reaction_jacobian(np.array([100.0, 0.0, 0.0]), 0.5, p, frozen_total=True)
    assert np.sort(np.linalg.eigvals(J).real) == pytest.approx([-0.6, -0.6, -0.1], abs=1e-12)


def test_endemic_characteristic_coefficients_positive():
    eq = endemic_equilibrium(P, 2.0, 100.0)
    J = reaction_jacobian(eq.state.as_array(), 2.0, P, frozen_total=True)
    coeffs = np.poly(J)[1:]
    assert np.all(coeffs > 0)


def test_equilibria_below_threshold():
    eqs = equilibria(P, 0.5, 100.0)
    assert [e.kind for e in eqs] == [EquilibriumKind.DISEASE_FREE]
    assert eqs[0].r0 == pytest.approx(0.5 / 1.1)


def test_equilibria_endemic_values():
    eqs = equilibria(P, 2.0, 100.0)
    assert [e.kind for e in eqs] == [EquilibriumKind.DISEASE_FREE, EquilibriumKind.ENDEMIC]
    s = eqs[1].state
    assert (s.y1, s.y2, s.y3) == pytest.approx((55.0, 16.875, 28.125), rel=1e-14)
    assert s.y1 + s.y2 + s.y3 == 100.0


def test_seasonal_r0_reported():
    p = Params.seasonal()
    eqs = equilibria(p, 0.8823, 1.4e6)
    # slightly above one with the monthly death rate
    assert eqs[0].r0 == pytest.approx(0.8823 / (0.8785 + 1 / 780))
    assert eqs[0].r0 > 1 and len(eqs) == 2


def test_endemic_requires_r0_above_one():
    with pytest.raises(ValueError):
        endemic_equilibrium(P, 1.0, 100.0)
    with pytest.raises(ValueError):
        Equilibrium(EquilibriumKind.ENDEMIC, StateTriple(1.0, 1.0, 1.0), 0.9)
    with pytest.raises(ValueError):
        Equilibrium(EquilibriumKind.DISEASE_FREE, StateTriple(1.0, 1.0, 0.0), 2.0)


@given(beta=st.floats(0.0, 10.0), gamma=rates, mu=rates, kappa=rates, y0=st.floats(1e-3, 1e7))
def test_endemic_positive_iff_r0_above_one(beta, gamma, mu, kappa, y0):
    p = Params(mu=mu, gamma=gamma, kappa=kappa)
    r0 = basic_reproductive_number(p, beta)
    eqs = equilibria(p, beta, y0)
    if r0 > 1:
        s = eqs[1].state
        assert s.y1 > 0 and s.y2 > 0 and s.y3 >= 0
        assert np.max(np.abs(reaction(s, beta, p))) <= 1e-10 * y0
    else:
        assert len(eqs) == 1


def test_basic_reproductive_number():
    assert basic_reproductive_number(P, 1.1) == pytest.approx(1.0)
    assert basic_reproductive_number(P, 2.0) == pytest.approx(2 / 1.1)
    assert basic_reproductive_number(P, 0.0) == 0.0
