import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given
from hypothesis import strategies as st

from fsisplit.discretization import (BOTTOM, GAMMA_TOP, INLET, INTERIOR, OUTLET, build_mesh,
                                     build_structure_mesh, hermite_basis, mass_matrix,
                                     mesh_summary, stiffness_matrix, weighted_mass)
from fsisplit.errors import ConfigurationError, DegenerateFrameError, ShapeError


def test_smallest_mesh():
    m = build_mesh(1.0, 1, 1)
    assert m.n_nodes == 4
    assert m.cells.shape == (1, 4)
    assert m.edges.shape[0] == 4
    assert set(m.edge_tags) == {GAMMA_TOP, INLET, OUTLET, BOTTOM}


def test_node_and_cell_counts():
    m = build_mesh(1.0, 4, 4)
    assert m.n_nodes == 25
    assert m.cells.shape[0] == 16


def test_total_weight_is_area():
    m = build_mesh(2.0, 4, 2)
    assert m.qw.sum() == pytest.approx(2.0, rel=1e-12)


@given(st.floats(0.2, 5.0), st.integers(1, 12), st.integers(1, 12))
def test_weights_sum_to_area(L, nz, nr):
    m = build_mesh(L, nz, nr)
    assert abs(m.qw.sum() - L) <= 1e-12 * L


def test_corner_priority():
    m = build_mesh(1.0, 3, 2)
    t = m.node_tags
    # top corners belong to gamma, bottom corners to inlet/outlet
    assert t[m.node_index(0, 2)] == GAMMA_TOP
    assert t[m.node_index(3, 2)] == GAMMA_TOP
    assert t[m.node_index(0, 0)] == INLET
    assert t[m.node_index(3, 0)] == OUTLET
    assert t[m.node_index(1, 0)] == BOTTOM
    assert t[m.node_index(1, 1)] == INTERIOR
    s = mesh_summary(m)
    assert sum(s["node_tags"].values()) == m.n_nodes


def test_side_nodes_include_corners():
    m = build_mesh(1.0, 3, 2)
    assert list(m.side_nodes(INLET)) == [0, 4, 8]
    with pytest.raises(ValueError):
        m.side_nodes(INTERIOR)


@pytest.mark.parametrize("args", [(0.0, 2, 2), (1.0, 0, 2), (1.0, 2, 1.5), (-1.0, 2, 2)])
def test_bad_fluid_mesh(args):
    with pytest.raises(ConfigurationError):
        build_mesh(*args)


def test_q1_interpolation_exact_for_bilinear():
    m = build_mesh(1.3, 5, 3)
    f = lambda z, r: (1 + 2 * z - r + 0.5 * z * r, 3 * r)  # noqa: E731
    u = m.interpolate(f)
    vals = m.values(u)
    fz, fr = f(m.qz, m.qr)
    assert np.allclose(vals[:, 0], fz, atol=1e-13)
    assert np.allclose(vals[:, 1], fr, atol=1e-13)
    g = m.gradients(u)
    assert np.allclose(g[:, 0, 0], 2 + 0.5 * m.qr, atol=1e-12)
    assert np.allclose(g[:, 0, 1], -1 + 0.5 * m.qz, atol=1e-12)
    assert np.allclose(g[:, 1, 1], 3.0, atol=1e-12)


def test_values_rejects_wrong_length():
    m = build_mesh(1.0, 2, 2)
    with pytest.raises(ShapeError):
        m.values(np.zeros(3))


@pytest.mark.parametrize("ns, ndof, free", [(2, 6, 2), (8, 18, 14)])
def test_structure_counts(ns, ndof, free):
    sm = build_structure_mesh(1.0, ns)
    assert sm.ndof == ndof
    assert len(sm.constrained) == 4
    assert ndof - len(sm.constrained) == free
    assert sm.free.size == 2 * free


def test_structure_mesh_needs_two_cells():
    with pytest.raises(ConfigurationError):
        build_structure_mesh(1.0, 1)


def test_clamped_biharmonic_kernel_is_trivial():
    sm = build_structure_mesh(1.0, 8)
    K2 = stiffness_matrix(sm, 2).tocsc()
    keep = np.setdiff1d(np.arange(sm.ndof), sm.constrained)
    A = K2[keep][:, keep]
    rhs = np.zeros(keep.size)
    sol = spla.spsolve(A, rhs)
    assert np.all(sol == 0)
    assert np.linalg.eigvalsh(A.toarray()).min() > 0


def test_hermite_reproduces_cubics():
    sm = build_structure_mesh(2.0, 5)
    p = lambda x: 1 - x + 0.3 * x**2 - 0.7 * x**3  # noqa: E731
    dp = lambda x: -1 + 0.6 * x - 2.1 * x**2  # noqa: E731
    c = np.empty(sm.ndof)
    c[0::2], c[1::2] = p(sm.nodes), dp(sm.nodes)
    x = np.linspace(0, 2, 37)
    assert np.allclose(sm.evaluate(c, x), p(x), atol=1e-13)
    assert np.allclose(sm.evaluate(c, x, 1), dp(x), atol=1e-12)
    assert np.allclose(sm.evaluate(c, x, 2), 0.6 - 4.2 * x, atol=1e-11)


def test_hermite_derivative_consistency():
    t = np.linspace(0.1, 0.9, 5)
    h, eps = 0.3, 1e-6
    fd = (hermite_basis(t + eps, h) - hermite_basis(t - eps, h)) / (2 * eps * h)
    assert np.allclose(fd, hermite_basis(t, h, 1), atol=1e-7)


def test_interpolate_zeroes_clamped_dofs():
    sm = build_structure_mesh(1.0, 4)
    c = sm.interpolate(lambda x: 1 + x, lambda x: np.ones_like(x))
    assert np.all(c[sm.constrained] == 0)


def test_profile_min_is_exact():
    sm = build_structure_mesh(1.0, 6)
    f = lambda x: np.sin(np.pi * x) ** 2 * (x - 0.3)  # noqa: E731
    df = lambda x: 2 * np.pi * np.sin(np.pi * x) * np.cos(np.pi * x) * (x - 0.3) + np.sin(np.pi * x) ** 2  # noqa: E731
    eta = np.concatenate([sm.interpolate(f, df), np.zeros(sm.ndof)])
    prof = sm.profile(eta, "z")
    dense = prof(np.linspace(0, 1, 200001)).min()
    assert prof.min_value() <= dense + 1e-12
    assert prof.min_value() == pytest.approx(dense, abs=1e-9)


def test_mass_partition_of_unity():
    m = build_mesh(1.0, 5, 4)
    M = mass_matrix(m)
    assert M.sum() == pytest.approx(1.0, rel=1e-13)


def test_weighted_mass_linear_in_weight():
    m = build_mesh(1.0, 4, 3)
    a, b = mass_matrix(m), weighted_mass(m, 1.2)
    assert abs(b - 1.2 * a).max() <= 1e-14


def test_weighted_mass_rejects_nonpositive_weight():
    m = build_mesh(1.0, 2, 2)
    w = np.ones(m.nq)
    w[3] = 0.0
    with pytest.raises(DegenerateFrameError):
        weighted_mass(m, w)


def test_mass_is_spd(rng):
    m = build_mesh(1.0, 4, 4)
    M = mass_matrix(m, components=2)
    for _ in range(100):
        x = rng.standard_normal(M.shape[0])
        assert x @ (M @ x) > 0
    assert abs(M - M.T).max() <= 1e-16


def test_quadrature_integrates_basis_functions():
    m = build_mesh(1.0, 3, 2)
    # each Q1 basis integrates to (area of support)/4 exactly
    M = mass_matrix(m)
    integrals = np.asarray(M.sum(axis=1)).ravel()
    support = np.zeros(m.n_nodes)
    for c in m.cells:
        support[c] += m.hz * m.hr
    assert np.allclose(integrals, support / 4, atol=1e-14)
    sm = build_structure_mesh(1.0, 3)
    ones = np.zeros(sm.ndof)
    ones[0::2] = 1.0
    Ms = mass_matrix(sm)
    assert float(ones @ (Ms @ ones)) == pytest.approx(1.0, abs=1e-13)
