import math

import numpy as np
import pytest
import scipy.sparse as sps
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from dampwave.analysis import (DecayRateEstimator, ErrorRecord, EnergyRecord,
                               compensator_params, convergence_rates, cubic_potential,
                               discrete_energy, error_norms, fit_decay_rate,
                               fit_norm_decay, rate, steady_state_solve,
                               theoretical_delta_max)
from dampwave.assembly import (assemble_load, assemble_stiffness, assemble_weighted_mass,
                               nodal_interpolant)
from dampwave.mesh import build_rect_mesh

PI = math.pi
M1 = sps.csr_matrix([[0.25]])
K1 = sps.csr_matrix([[4.0]])


def phi(x, y):
    return np.sin(PI * x) * np.sin(PI * y)


def grad_phi(x, y):
    return (PI * np.cos(PI * x) * np.sin(PI * y), PI * np.sin(PI * x) * np.cos(PI * y))


# energies

def test_energy_zero_state():
    z = np.zeros(1)
    assert discrete_energy(z, z, 0.1, M1, K1).E == 0.0


def test_energy_static_one_dof():
    e = discrete_energy(np.ones(1), np.ones(1), 0.1, M1, K1)
    assert (e.kinetic, e.potential, e.E) == (0.0, 2.0, 2.0)


def test_energy_sign_flip_one_dof():
    k = 0.1
    e = discrete_energy(np.array([3.0]), np.array([-3.0]), k, M1, K1)
    assert e.potential == 0.0
    assert e.kinetic == pytest.approx(0.5 * 0.25 * (2 / k) ** 2 * 9, rel=1e-15)


def test_energy_with_compensator():
    e = discrete_energy(np.ones(1), np.ones(1), 0.1, M1, K1, beta=32.0)
    assert e.potential == pytest.approx(0.5 * (4 + 32 * 0.25))


def test_energy_additivity(rng):
    m = build_rect_mesh(6, 6)
    M, K = assemble_weighted_mass(m), assemble_stiffness(m)
    a, b = rng.standard_normal((2, m.n_interior))
    e = discrete_energy(a, b, 0.05, M, K, beta=1.5, t=0.3)
    dU = (b - a) / 0.05
    V = (a + b) / 2
    kin = 0.5 * dU @ (M @ dU)
    pot = 0.5 * V @ (K @ V) + 0.75 * V @ (M @ V)
    assert e.E == pytest.approx(kin + pot, rel=1e-14)
    assert e.E == pytest.approx(e.kinetic + e.potential, rel=1e-14)
    assert e.kinetic >= 0 and e.potential >= 0 and e.t == 0.3


def test_energy_rejects_bad_input():
    with pytest.raises(ValueError):
        discrete_energy(np.ones(1), np.ones(1), 0.0, M1, K1)
    with pytest.raises(ValueError):
        discrete_energy(np.ones(1), np.ones(2), 0.1, M1, K1)


def test_cubic_potential_differences_match_work(rng):
    # G(b, c) - G(a, b) = (c - a)' M g(b) / 2 for the linear part of g(u) = u^3 - u
    M = sps.identity(3, format="csr")
    a, b, c = rng.standard_normal((3, 3)) * 1e-4
    lhs = cubic_potential(b, c, M) - cubic_potential(a, b, M)
    rhs = 0.5 * (c - a) @ (b**3 - b)
    assert lhs == pytest.approx(rhs, rel=1e-6)


# error norms

def test_interpolant_has_zero_error():
    # a linear function is its own P1 interpolant; pass all nodal values
    m = build_rect_mesh(5, 5)
    lin = lambda x, y: 1 + 2 * x - y
    full = lin(m.nodes[:, 0], m.nodes[:, 1])
    e = error_norms(m, full, lin, lambda x, y: (2 + 0 * x, -1 + 0 * x))
    assert e.L2 <= 1e-14 and e.H1 <= 1e-13 and e.Linf <= 1e-15


def test_interior_vector_of_interpolant():
    m = build_rect_mesh(6, 6)
    bump = lambda x, y: x * (1 - x) * y * (1 - y)
    e = error_norms(m, nodal_interpolant(m, bump), bump)
    assert e.Linf <= 1e-16


def test_zero_solution_against_sine_product():
    m = build_rect_mesh(8, 8)
    e = error_norms(m, np.zeros(m.n_interior), phi, grad_phi)
    assert e.L2 == pytest.approx(0.5, rel=0.02)
    assert e.Linf == pytest.approx(1.0, rel=1e-12)
    # full H1 norm of phi: sqrt(1/4 + pi^2/2)
    assert e.H1 == pytest.approx(math.sqrt(0.25 + PI**2 / 2), rel=0.02)
    assert e.H1 >= e.L2


def test_h1_missing_gradient_is_nan():
    m = build_rect_mesh(4, 4)
    e = error_norms(m, np.zeros(m.n_interior), phi)
    assert math.isnan(e.H1)


def test_error_record_metadata():
    m = build_rect_mesh(4, 4)
    e = error_norms(m, np.zeros(m.n_interior), phi, k=0.01)
    assert (e.N, e.k) == (4, 0.01) and e.h == m.h


# rates

def test_rate_examples():
    assert rate(1e-2, 2.5e-3, 0.1, 0.05) == pytest.approx(2.0, rel=1e-12)
    assert rate(1e-2, 1e-2, 0.1, 0.05) == 0.0
    assert math.isnan(rate(0.0, 1e-3, 0.1, 0.05))
    assert math.isnan(rate(1e-2, 1e-3, 0.1, 0.1))


@settings(max_examples=60)
@given(C=st.floats(1e-6, 1e6), p=st.floats(0.5, 3.0),
       hs=st.lists(st.floats(1e-3, 1.0), min_size=2, max_size=5, unique=True))
def test_rate_formula_exact(C, p, hs):
    hs = sorted(hs, reverse=True)
    if min(a / b for a, b in zip(hs, hs[1:])) < 1.01:
        return
    recs = [ErrorRecord(h, 0.0, 0, C * h**p, C * h**p, C * h**p) for h in hs]
    out = convergence_rates(recs)
    for v in out["L2"]:
        assert v == pytest.approx(p, abs=1e-12)


def test_convergence_rates_validation():
    r = ErrorRecord(0.1, 0.0, 10, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        convergence_rates([r])
    with pytest.raises(ValueError):
        convergence_rates([r, r])


# decay fits

def test_fit_exact_exponential():
    t = np.linspace(0, 1, 101)
    recs = [EnergyRecord(ti, math.exp(-2 * PI * ti), 0, 0) for ti in t]
    fit = fit_decay_rate(recs, (0.0, 1.0))
    assert fit.delta_est == pytest.approx(PI, abs=1e-10)
    assert fit.residual <= 1e-10 and fit.n_points == 101


def test_fit_constant_is_zero_rate():
    t = np.linspace(0, 1, 11)
    fit = fit_decay_rate([EnergyRecord(ti, 3.0, 0, 0) for ti in t])
    assert fit.delta_est == pytest.approx(0.0, abs=1e-14)


def test_fit_default_window():
    t = np.linspace(0, 2, 21)
    fit = fit_decay_rate([EnergyRecord(ti, 1.0, 0, 0) for ti in t])
    assert fit.window == (0.4, 2.0) and fit.n_points == 17


@settings(max_examples=60)
@given(c=st.floats(1e-100, 1e100), d=st.floats(0.01, 20), noise=st.integers(0, 2**31))
def test_fit_scale_invariance(c, d, noise):
    t = np.linspace(0, 1, 50)
    y = np.exp(-2 * d * t) * (1 + 0.1 * np.random.default_rng(noise).random(50))
    a = DecayRateEstimator((0.2, 1.0)).fit(t, y).delta_
    b = DecayRateEstimator((0.2, 1.0)).fit(t, c * y).delta_
    assert b == pytest.approx(a, abs=1e-12)


def test_fit_fully_decayed():
    t = np.linspace(0, 1, 20)
    est = DecayRateEstimator((0.2, 1.0)).fit(t, np.zeros(20))
    assert est.status_ == "fully decayed" and math.isnan(est.delta_)
    assert est.as_fit().status == "fully decayed"


def test_fit_window_errors():
    t = np.linspace(0, 1, 20)
    with pytest.raises(ValueError):
        DecayRateEstimator((2.0, 3.0)).fit(t, np.ones(20))
    with pytest.raises(ValueError):
        DecayRateEstimator((0.99, 1.0)).fit(t, np.ones(20))
    with pytest.raises(ValueError):
        DecayRateEstimator().fit(t, np.ones(19))


def test_estimator_api():
    est = DecayRateEstimator(window=(0.0, 1.0), power=1)
    assert clone(est).get_params() == est.get_params()
    t = np.linspace(0, 1, 30)
    est.fit(t, 5 * np.exp(-3 * t))
    assert est.delta_ == pytest.approx(3.0, rel=1e-12)
    np.testing.assert_allclose(est.predict([0.0, 0.5]), [5.0, 5 * math.exp(-1.5)], rtol=1e-12)
    assert fit_norm_decay(t, 5 * np.exp(-3 * t), (0.0, 1.0)).delta_est == pytest.approx(3.0)


# theory

def test_theoretical_delta_max():
    assert theoretical_delta_max(10, 33) == 0.55
    assert theoretical_delta_max(3 * PI, 2 * PI**2) == pytest.approx(PI / 9, rel=1e-15)
    lam = 20.0
    a = math.sqrt(lam / 2)
    assert theoretical_delta_max(a, lam) == pytest.approx(a / 3, rel=1e-15)
    with pytest.raises(ValueError):
        theoretical_delta_max(0.0, 1.0)


@given(a=st.floats(0.01, 100), l1=st.floats(0.01, 1e4), l2=st.floats(0.01, 1e4))
def test_delta_max_monotone(a, l1, l2):
    lo, hi = sorted((l1, l2))
    assert theoretical_delta_max(a, lo) <= theoretical_delta_max(a, hi)
    a0 = math.sqrt(hi / 2)
    assert theoretical_delta_max(a0 + a, hi) <= theoretical_delta_max(a0, hi)


def test_compensator_params():
    assert compensator_params(2) == (10, 32)
    assert compensator_params(5) == (40, 335)
    d = 1e-9
    a, b = compensator_params(d)
    assert a / d == pytest.approx(3.0) and b / d == pytest.approx(2.0)
    with pytest.raises(ValueError):
        compensator_params(0.0)


# steady state

def test_steady_state_examples():
    assert steady_state_solve(K1, M1, 0.0, np.zeros(1)) == pytest.approx([0.0])
    m = build_rect_mesh(2, 2)
    u = steady_state_solve(assemble_stiffness(m), assemble_weighted_mass(m), 0.0, np.array([1.0]))
    np.testing.assert_allclose(u, [0.25], rtol=1e-15)


def test_steady_state_manufactured_rate():
    errs, hs = [], []
    for N in (8, 16, 32):
        m = build_rect_mesh(N, N)
        F = assemble_load(m, lambda x, y, t: 2 * PI**2 * phi(x, y))
        u = steady_state_solve(assemble_stiffness(m), assemble_weighted_mass(m), 0.0, F)
        errs.append(error_norms(m, u, phi).L2)
        hs.append(m.h)
    rates = [rate(errs[i], errs[i + 1], hs[i], hs[i + 1]) for i in range(2)]
    assert all(1.8 <= r <= 2.2 for r in rates), rates
