import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from fsisplit.discretization import build_structure_mesh, gauss_legendre
from fsisplit.errors import ConfigurationError, ConfigurationWarning, ShapeError
from fsisplit.structure import assemble_Le, structure_step


def random_field(rng, sm, scale=1.0):
    x = scale * rng.standard_normal(sm.n_dofs)
    x[sm.mask] = 0.0
    return x


def test_mass_like_operator(rng):
    sm = build_structure_mesh(1.0, 8)
    Le = assemble_Le(sm, 1.0, 0.0, 0.0)
    eta = random_field(rng, sm)
    assert Le.energy(eta) == pytest.approx(Le.l2_sq(eta), rel=1e-12)


def test_bending_energy_matches_dense_quadrature():
    sm = build_structure_mesh(1.0, 6)
    Le = assemble_Le(sm, 0.0, 0.0, 1.0)
    # clamped profile x^2 (1-x)^2 is a quartic, so build it from its own Hermite data
    f = lambda x: x**2 * (1 - x) ** 2  # noqa: E731
    df = lambda x: 2 * x * (1 - x) ** 2 - 2 * x**2 * (1 - x)  # noqa: E731
    c = sm.interpolate(f, df)
    eta = np.concatenate([c, 0.5 * c])
    gx, gw = gauss_legendre(12)
    dense = 0.0
    for k in range(sm.ns):
        x = k * sm.h + sm.h * gx
        dense += np.sum(sm.h * gw * sm.evaluate(c, x, 2) ** 2)
    assert Le.energy(eta) == pytest.approx(1.25 * dense, rel=1e-12)


def test_symmetry(rng):
    sm = build_structure_mesh(1.0, 10)
    Le = assemble_Le(sm, 0.3, 0.7, 1.1)
    for _ in range(20):
        a, b = random_field(rng, sm), random_field(rng, sm)
        assert abs(Le.inner(a, b) - Le.inner(b, a)) <= 1e-13 * (1 + abs(Le.inner(a, b)))


@pytest.mark.parametrize("c", [(0, 0, 1), (1, 0, 0), (0.5, 2, 0.1)])
def test_coercive_on_free_dofs(c):
    sm = build_structure_mesh(1.0, 8)
    Le = assemble_Le(sm, *c)
    f = sm.free
    lam = sla.eigh(Le.K[f][:, f].toarray(), Le.M[f][:, f].toarray(), eigvals_only=True)
    assert lam.min() > 0


def test_negative_coefficient_rejected():
    with pytest.raises(ConfigurationError):
        assemble_Le(build_structure_mesh(1.0, 4), -1.0, 0, 1)


def test_degenerate_operator_warns():
    sm = build_structure_mesh(1.0, 4)
    with pytest.warns(ConfigurationWarning):
        assemble_Le(sm, 0, 0, 0)


def test_zero_operator_test_mode(rng):
    sm = build_structure_mesh(1.0, 6)
    Le = assemble_Le(sm, 0, 0, 0, test_mode=True)
    eta, v = random_field(rng, sm), random_field(rng, sm)
    r = structure_step(eta, v, Le, 0.1)
    assert np.allclose(r.v_half, v, atol=1e-14)
    assert np.allclose(r.eta_half, eta + 0.1 * v, atol=1e-14)


def test_eigenmode_reduction():
    sm = build_structure_mesh(1.0, 8)
    Le = assemble_Le(sm, 0.2, 0.0, 1.0)
    f = sm.free
    lam, vec = sla.eigh(Le.K[f][:, f].toarray(), Le.M[f][:, f].toarray())
    w = np.zeros(sm.n_dofs)
    w[f] = vec[:, 2]
    dt, c = 0.05, 1.7
    r = structure_step(np.zeros(sm.n_dofs), c * w, Le, dt)
    assert np.allclose(r.v_half, c / (1 + dt**2 * lam[2]) * w, atol=1e-12)


@given(st.integers(2, 20), st.floats(1e-3, 0.5), st.floats(0.01, 3.0), st.integers(0, 2**32 - 1))
def test_energy_identity(ns, dt, scale, seed):
    rng = np.random.default_rng(seed)
    sm = build_structure_mesh(1.0, ns)
    Le = assemble_Le(sm, *rng.uniform(0, 2, 2), max(rng.uniform(0, 2), 1e-3))
    r = structure_step(random_field(rng, sm, scale), random_field(rng, sm, scale), Le, dt)
    assert r.audit_residual <= 1e-10 * (r.energy_before + 1)
    # kinematic relation holds to rounding and constraints stay exact
    assert np.all(r.v_half[sm.mask] == 0) and np.all(r.eta_half[sm.mask] == 0)


def test_kinematic_relation(rng):
    sm = build_structure_mesh(1.0, 8)
    Le = assemble_Le(sm)
    eta, v = random_field(rng, sm), random_field(rng, sm)
    r = structure_step(eta, v, Le, 0.02)
    assert np.array_equal(r.eta_half - eta, 0.02 * r.v_half) or np.allclose(
        r.eta_half - eta, 0.02 * r.v_half, rtol=0, atol=1e-16)


def test_step_input_checks():
    sm = build_structure_mesh(1.0, 4)
    Le = assemble_Le(sm)
    with pytest.raises(ValueError):
        structure_step(np.zeros(sm.n_dofs), np.zeros(sm.n_dofs), Le, 0.0)
    with pytest.raises(ShapeError):
        structure_step(np.zeros(3), np.zeros(sm.n_dofs), Le, 0.1)


def test_factorization_cached():
    sm = build_structure_mesh(1.0, 4)
    Le = assemble_Le(sm)
    assert Le.step_factor(0.1) is Le.step_factor(0.1)
