import numpy as np
import pytest

from fsisplit.ale import ale_velocity, build_frame
from fsisplit.discretization import GAMMA_TOP, build_discretization, smooth_random_eta
from fsisplit.errors import AssemblyError, ConfigurationError
from fsisplit.fluid import (FluidParams, NoiseLoad, assemble_fluid_system, constrained_mask,
                            divergence_norm, edge_load, fluid_step)
from fsisplit.oracles import dense_fluid_matrix


def frames(disc, rng, amp=0.05):
    sm = disc.smesh
    f0 = build_frame(smooth_random_eta(rng, sm, amp), disc)
    f1 = build_frame(smooth_random_eta(rng, sm, amp), disc)
    return f0, f1


def system(disc, rng, params, pressure=(0.0, 0.0), noise=None, amp=0.05, scale=1.0):
    f0, f1 = frames(disc, rng, amp)
    u = scale * rng.standard_normal(disc.mesh.n_dofs)
    u[constrained_mask(disc)[: disc.mesh.n_dofs]] = 0.0
    vh = scale * rng.standard_normal(disc.smesh.n_dofs)
    vh[disc.smesh.mask] = 0.0
    w = ale_velocity(f0, f1, params.dt)
    return assemble_fluid_system(f0, f1, u, w, vh, params, pressure, noise)


P = FluidParams(nu=0.1, kappa_div=50.0, kappa_bnd=50.0, dt=0.05)


def test_zero_data_gives_zero(disc_small):
    f = build_frame(np.zeros(disc_small.smesh.n_dofs), disc_small)
    w = np.zeros((disc_small.mesh.nq, 2))
    sys_ = assemble_fluid_system(f, f, np.zeros(disc_small.mesh.n_dofs), w,
                                 np.zeros(disc_small.smesh.n_dofs), P)
    assert not np.any(sys_.rhs)
    r = fluid_step(sys_)
    assert not np.any(r.u_np1) and not np.any(r.v_np1)
    assert r.audit_residual == 0 and r.div_norm == 0


def test_advection_block_is_skew(disc_medium, rng):
    for _ in range(3):
        s = system(disc_medium, rng, P)
        B = s.advection
        assert abs(B + B.T).max() <= 1e-13


def test_symmetric_part_positive_definite(disc_small, rng):
    s = system(disc_small, rng, P)
    A = s.matrix[s.free][:, s.free].toarray()
    assert np.linalg.eigvalsh(0.5 * (A + A.T)).min() > 0


@pytest.mark.parametrize("mode", ["penalty_both", "zero_z_penalty_r"])
def test_matches_dense_oracle(mode):
    rng = np.random.default_rng(3)
    disc = build_discretization(1.0, 3, 3, 3)
    p = FluidParams(0.3, 7.0, 5.0, 0.1, gamma_constraint=mode)
    eta0 = smooth_random_eta(rng, disc.smesh, 0.05)
    eta1 = smooth_random_eta(rng, disc.smesh, 0.05)
    f0, f1 = build_frame(eta0, disc), build_frame(eta1, disc)
    u = rng.standard_normal(disc.mesh.n_dofs)
    s = assemble_fluid_system(f0, f1, u, ale_velocity(f0, f1, p.dt), np.zeros(disc.smesh.n_dofs), p)
    ref = dense_fluid_matrix(1.0, 3, 3, 3, eta0, eta1, u, p.nu, p.kappa_div, p.kappa_bnd, p.dt, mode)
    assert np.max(np.abs(s.matrix.toarray() - ref)) <= 1e-12


def test_pressure_drop_pushes_flow_downstream():
    disc = build_discretization(1.0, 8, 4, 8)
    f = build_frame(np.zeros(disc.smesh.n_dofs), disc)
    p = FluidParams(1.0, 1e4, 1e4, 0.05)
    s = assemble_fluid_system(f, f, np.zeros(disc.mesh.n_dofs), np.zeros((disc.mesh.nq, 2)),
                              np.zeros(disc.smesh.n_dofs), p, (1.0, 0.0))
    r = fluid_step(s)
    mid = disc.mesh.node_index(4, 2)
    assert r.u_np1[mid] > 0
    # the dense solve of the same system agrees
    A = s.matrix[s.free][:, s.free].toarray()
    x = np.linalg.solve(A, s.rhs[s.free])
    X = np.zeros(s.rhs.size)
    X[s.free] = x
    assert np.allclose(X[: disc.mesh.n_dofs], r.u_np1, atol=1e-10)


def test_energy_identity_randomized():
    rng = np.random.default_rng(11)
    disc = build_discretization(1.0, 6, 3, 6)
    worst = 0.0
    for _ in range(50):
        p = FluidParams(10 ** rng.uniform(-2, 0), 10 ** rng.uniform(0, 3), 10 ** rng.uniform(0, 3),
                        10 ** rng.uniform(-3, -1), advection="lagged")
        press = tuple(rng.uniform(-2, 2, 2))
        noise = NoiseLoad(0.1 * rng.standard_normal((disc.mesh.nq, 2)),
                          0.1 * rng.standard_normal((disc.smesh.nq, 2)))
        s = system(disc, rng, p, press, noise)
        r = fluid_step(s)
        E = r.terms["kin_old"] + r.terms["struct_half"]
        worst = max(worst, r.audit_residual / (E + p.dt * sum(x * x for x in press) + 1))
    assert worst <= 1e-9


def test_advection_does_no_work(disc_medium, rng):
    r = fluid_step(system(disc_medium, rng, P))
    assert abs(r.advection_work) <= 1e-12


def test_picard_mode_converges(disc_small, rng):
    p = FluidParams(0.1, 50.0, 50.0, 0.05, advection="picard")
    r = fluid_step(system(disc_small, rng, p, scale=0.3))
    assert r.iterations >= 2
    assert r.audit_residual <= 1e-9


def test_gmres_matches_direct(disc_small):
    d = FluidParams(0.1, 50.0, 50.0, 0.05, solver="direct")
    g = FluidParams(0.1, 50.0, 50.0, 0.05, solver="gmres")
    a = fluid_step(system(disc_small, np.random.default_rng(5), d))
    b = fluid_step(system(disc_small, np.random.default_rng(5), g))
    assert np.allclose(a.u_np1, b.u_np1, atol=1e-9)


def test_zero_z_mode_pins_tangential_trace(disc_small, rng):
    p = FluidParams(0.1, 50.0, 50.0, 0.05, gamma_constraint="zero_z_penalty_r")
    r = fluid_step(system(disc_small, rng, p))
    top = disc_small.mesh.side_nodes(GAMMA_TOP)
    assert np.all(r.u_np1[top] == 0)


def test_essential_dofs_exactly_zero(disc_small, rng):
    s = system(disc_small, rng, P, (1.0, 0.5))
    r = fluid_step(s)
    X = np.concatenate([r.u_np1, r.v_np1])
    assert np.all(X[s.mask] == 0)


def test_divergence_norm_examples(disc_small):
    m = disc_small.mesh
    f = build_frame(np.zeros(disc_small.smesh.n_dofs), disc_small)
    assert divergence_norm(f, np.zeros(m.n_dofs)) == 0
    assert divergence_norm(f, m.interpolate(lambda z, r: (r, 0 * r))) <= 1e-13
    assert divergence_norm(f, m.interpolate(lambda z, r: (z, 0 * r))) == pytest.approx(1.0, abs=1e-13)


def test_edge_load_lengths(disc_small):
    from fsisplit.discretization import INLET
    assert edge_load(disc_small.mesh, INLET).sum() == pytest.approx(1.0)


@pytest.mark.parametrize("bad", [dict(dt=0.0), dict(nu=-1.0), dict(kappa_div=0.0),
                                 dict(gamma_constraint="x"), dict(advection="x"), dict(solver="x")])
def test_params_validated(bad):
    kw = dict(nu=0.1, kappa_div=1.0, kappa_bnd=1.0, dt=0.1) | bad
    with pytest.raises(ConfigurationError):
        FluidParams(**kw)


def test_size_mismatch(disc_small):
    f = build_frame(np.zeros(disc_small.smesh.n_dofs), disc_small)
    with pytest.raises(AssemblyError):
        assemble_fluid_system(f, f, np.zeros(3), np.zeros((disc_small.mesh.nq, 2)),
                              np.zeros(disc_small.smesh.n_dofs), P)
