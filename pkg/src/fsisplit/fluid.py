"""Penalized fluid / structure-velocity sub-step on a fixed pair of ALE frames.

Unknowns are stacked as ``X = [u (2 n_nodes), v (2 ndof)]``.  The discrete
problem tested with ``(q, psi)`` reads

    int J^n (u - u^n) q + 1/2 int (J^{n+1} - J^n) u q
      + dt/2 int J^n [((b . grad^eta) u) q - ((b . grad^eta) q) u]
      + 2 nu dt int J^n D^eta u : D^eta q + kd dt int div^eta u div^eta q
      + int_0^L (v - v_half) psi + kb dt int_Gamma S (u|_Gamma - v)(q|_Gamma - psi)
    = dt (P_in int_in q_z - P_out int_out q_z) + (F, (q, psi)),

with ``b = u^n - w`` and ``F`` the noise load.  All operators use the frame of
step n except the Jacobian difference.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ale import AleFrame, sym_gradient, transformed_divergence
from .discretization import BOTTOM, GAMMA_TOP, INLET, OUTLET, Discretization, weighted_mass
from .errors import AssemblyError, ConfigurationError, ShapeError, SolverError

GAMMA_CONSTRAINTS = ("penalty_both", "zero_z_penalty_r")
ADVECTION_MODES = ("lagged", "picard")
DIRECT_LIMIT = 64


@dataclass(frozen=True)
class FluidParams:
    nu: float
    kappa_div: float
    kappa_bnd: float
    dt: float
    gamma_constraint: str = "penalty_both"
    advection: str = "lagged"
    solver: str = "auto"  # auto | direct | gmres
    picard_tol: float = 1e-12
    picard_max: int = 30

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if not self.nu > 0:
            raise ConfigurationError("nu must be positive")
        if not self.kappa_div > 0:
            raise ConfigurationError("kappa_div must be positive")
        if self.kappa_bnd < 0:
            raise ConfigurationError("kappa_bnd must be >= 0")
        if self.gamma_constraint not in GAMMA_CONSTRAINTS:
            raise ConfigurationError(f"gamma_constraint must be one of {GAMMA_CONSTRAINTS}")
        if self.advection not in ADVECTION_MODES:
            raise ConfigurationError(f"advection must be one of {ADVECTION_MODES}")
        if self.solver not in ("auto", "direct", "gmres"):
            raise ConfigurationError("solver must be auto, direct or gmres")


@dataclass
class NoiseLoad:
    """Noise forcing as quadrature-point fields: fluid (nq, 2), structure (nsq, 2)."""

    fluid: np.ndarray
    structure: np.ndarray

    @classmethod
    def zero(cls, disc):
        return cls(np.zeros((disc.mesh.nq, 2)), np.zeros((disc.smesh.nq, 2)))


def constrained_mask(disc, gamma_constraint="penalty_both"):
    """Boolean mask over the stacked unknowns of homogeneous essential dofs.

    ``u_r`` vanishes on the closed inlet, outlet and bottom edges (corners
    shared with Gamma included); clamped structure dofs vanish; in
    ``zero_z_penalty_r`` mode ``u_z`` also vanishes on Gamma.
    """
    mesh, sm = disc.mesh, disc.smesh
    nn = mesh.n_nodes
    mask = np.zeros(mesh.n_dofs + sm.n_dofs, dtype=bool)
    for tag in (INLET, OUTLET, BOTTOM):
        mask[nn + mesh.side_nodes(tag)] = True
    if gamma_constraint == "zero_z_penalty_r":
        mask[mesh.side_nodes(GAMMA_TOP)] = True
    mask[mesh.n_dofs:] = sm.mask
    return mask


def boundary_traces(disc):
    """Sparse maps from X to trace gaps ``u|_Gamma - v`` per component at Gamma points."""
    mesh, sm, gq = disc.mesh, disc.smesh, disc.gamma
    nn, nu_, nb = mesh.n_nodes, mesh.n_dofs, gq.nb
    ntot = nu_ + sm.n_dofs
    rows2 = np.repeat(np.arange(nb), 2)
    rows4 = np.repeat(np.arange(nb), 4)
    out = []
    for c in range(2):
        cols_u = (c * nn + gq.tnodes).ravel()
        cols_v = (nu_ + c * sm.ndof + gq.sdofs).ravel()
        data = np.concatenate([gq.tphi.ravel(), -gq.sphi.ravel()])
        rows = np.concatenate([rows2, rows4])
        cols = np.concatenate([cols_u, cols_v])
        out.append(sp.coo_matrix((data, (rows, cols)), shape=(nb, ntot)).tocsr())
    return out


def edge_load(mesh, tag):
    """``int_edge phi_a`` for the Q1 basis along the inlet or outlet edge."""
    vec = np.zeros(mesh.n_nodes)
    for (a, b), t in zip(mesh.edges, mesh.edge_tags):
        if t == tag:
            ln = np.linalg.norm(mesh.nodes[a] - mesh.nodes[b])
            vec[a] += 0.5 * ln
            vec[b] += 0.5 * ln
    return vec


@dataclass(eq=False)
class FluidSystem:
    disc: Discretization
    params: FluidParams
    frame_n: AleFrame
    frame_np1: AleFrame
    u_n: np.ndarray
    v_half: np.ndarray
    w: np.ndarray
    matrix: sp.csr_matrix
    advection: sp.csr_matrix
    rhs: np.ndarray
    mask: np.ndarray
    pressure_pair: tuple
    pressure_load: np.ndarray
    noise: NoiseLoad
    noise_vector: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def free(self):
        return np.flatnonzero(~self.mask)


def _local_geometry(mesh, frame):
    # G[q, a, k] = sum_m dphi_a/dx_m (grad A)^{-1}_{mk}
    return np.einsum("qam,qmk->qak", mesh.qdphi, frame.gradA_inv)


def _scatter(mesh, blocks, shape):
    """Assemble per-quadrature-point local blocks ``blocks[(c, d)] -> (nq, 4, 4)``."""
    nn = mesh.n_nodes
    rows, cols, vals = [], [], []
    qn = mesh.qnodes
    R = np.broadcast_to(qn[:, :, None], (mesh.nq, 4, 4))
    C = np.broadcast_to(qn[:, None, :], (mesh.nq, 4, 4))
    for (c, d), blk in blocks.items():
        rows.append((c * nn + R).ravel())
        cols.append((d * nn + C).ravel())
        vals.append(blk.ravel())
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=shape).tocsr()


def advection_matrix(disc, frame_n, beta, dt, shape=None):
    """Skew advection block ``dt/2 int J [phi_a (b.G_b) - phi_b (b.G_a)]``."""
    mesh = disc.mesh
    shape = shape or (mesh.n_dofs, mesh.n_dofs)
    G = _local_geometry(mesh, frame_n)
    bG = np.einsum("qk,qak->qa", beta, G)
    wq = mesh.qw * frame_n.J * 0.5 * dt
    blk = wq[:, None, None] * (mesh.qphi[:, :, None] * bG[:, None, :]
                               - bG[:, :, None] * mesh.qphi[:, None, :])
    return _scatter(mesh, {(0, 0): blk, (1, 1): blk}, shape)


def _fluid_operator(disc, frame_n, frame_np1, params):
    """Everything of the matrix except advection, on the stacked layout."""
    mesh, sm = disc.mesh, disc.smesh
    ntot = mesh.n_dofs + sm.n_dofs
    G = _local_geometry(mesh, frame_n)
    w = mesh.qw
    phi = mesh.qphi
    mass = (w * 0.5 * (frame_n.J + frame_np1.J))[:, None, None] * phi[:, :, None] * phi[:, None, :]
    GG = np.einsum("qak,qbk->qab", G, G)
    wv = (w * 2.0 * params.nu * params.dt * frame_n.J)[:, None, None]
    wd = (w * params.kappa_div * params.dt)[:, None, None]
    blocks = {}
    for c in range(2):
        for d in range(2):
            blk = wv * 0.5 * G[:, :, d][:, :, None] * G[:, :, c][:, None, :]
            blk = blk + wd * G[:, :, c][:, :, None] * G[:, :, d][:, None, :]
            if c == d:
                blk = blk + mass + wv * 0.5 * GG
            blocks[(c, d)] = blk
    A = _scatter(mesh, blocks, (ntot, ntot))

    Ms = structure_mass(sm)
    A = A + sp.block_diag([sp.csr_matrix((mesh.n_dofs, mesh.n_dofs)), Ms], format="csr")

    if params.kappa_bnd > 0:
        comps = (1,) if params.gamma_constraint == "zero_z_penalty_r" else (0, 1)
        Ts = boundary_traces(disc)
        Wb = sp.diags(disc.gamma.w * frame_n.S)
        for c in comps:
            A = A + params.kappa_bnd * params.dt * (Ts[c].T @ Wb @ Ts[c])
    return A.tocsr(), Ms


def noise_vector(disc, noise):
    """Project a quadrature-point noise load onto the test functions."""
    mesh, sm = disc.mesh, disc.smesh
    nq, nsq = mesh.nq, sm.nq
    if noise.fluid.shape != (nq, 2) or noise.structure.shape != (nsq, 2):
        raise ShapeError("noise load does not match the quadrature layout")
    out = np.zeros(mesh.n_dofs + sm.n_dofs)
    nn = mesh.n_nodes
    for c in range(2):
        np.add.at(out, c * nn + mesh.qnodes, (mesh.qw * noise.fluid[:, c])[:, None] * mesh.qphi)
        np.add.at(out, mesh.n_dofs + c * sm.ndof + sm.qdofs,
                  (sm.qw * noise.structure[:, c])[:, None] * sm.qbasis[0])
    return out


def assemble_fluid_system(frame_n, frame_np1, u_n, w, v_half, params, pressure_pair=(0.0, 0.0),
                          noise=None, beta=None):
    """Assemble the coupled penalized system for one fluid sub-step.

    ``beta`` overrides the advecting field (quadrature values, (nq, 2)); by
    default it is ``u^n - w``.
    """
    disc = frame_n.disc
    if frame_np1.disc is not disc:
        raise AssemblyError("frames built on different discretizations")
    mesh, sm = disc.mesh, disc.smesh
    u_n = np.asarray(u_n, dtype=float)
    v_half = np.asarray(v_half, dtype=float)
    if u_n.shape != (mesh.n_dofs,) or v_half.shape != (sm.n_dofs,):
        raise AssemblyError(f"state sizes {u_n.shape}, {v_half.shape} do not match "
                            f"({mesh.n_dofs},), ({sm.n_dofs},)")
    w = np.asarray(w, dtype=float)
    if w.shape != (mesh.nq, 2):
        raise AssemblyError(f"ALE velocity must have shape ({mesh.nq}, 2)")
    noise = noise or NoiseLoad.zero(disc)
    ntot = mesh.n_dofs + sm.n_dofs

    A, Ms = _fluid_operator(disc, frame_n, frame_np1, params)
    if beta is None:
        beta = mesh.values(u_n) - w
    B = advection_matrix(disc, frame_n, beta, params.dt, (ntot, ntot))

    Mn = weighted_mass(mesh, frame_n.J, components=2)
    p_in, p_out = (float(p) for p in pressure_pair)
    pl = np.zeros(ntot)
    pl[: mesh.n_nodes] = params.dt * (p_in * edge_load(mesh, INLET) - p_out * edge_load(mesh, OUTLET))
    nv = noise_vector(disc, noise)
    rhs = np.concatenate([Mn @ u_n, Ms @ v_half]) + pl + nv
    mask = constrained_mask(disc, params.gamma_constraint)
    return FluidSystem(disc, params, frame_n, frame_np1, u_n, v_half, w, (A + B).tocsr(), B,
                       rhs, mask, (p_in, p_out), pl, noise, nv,
                       info={"base": A})


@dataclass
class FluidStepResult:
    u_np1: np.ndarray
    v_np1: np.ndarray
    div_norm: float
    audit_residual: float
    boundary_gap: float
    advection_work: float
    solve_residual: float
    terms: dict
    iterations: int = 1


def _solve(system):
    free = system.free
    A = system.matrix[free][:, free].tocsc()
    b = system.rhs[free]
    X = np.zeros(system.rhs.size)
    if not np.any(b):
        return X, 0.0, {"method": "trivial"}
    m = system.disc.mesh
    method = system.params.solver
    if method == "auto":
        method = "direct" if max(m.nz, m.nr) <= DIRECT_LIMIT else "gmres"
    if method == "direct":
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            raise SolverError(f"fluid system factorization failed: {exc}") from exc
        x = lu.solve(b)
        # large penalties make the system stiff; two refinement sweeps recover the digits
        for _ in range(2):
            x = x + lu.solve(b - A @ x)
        info = {"method": "direct"}
    else:
        d = A.diagonal()
        if np.any(d == 0):
            raise SolverError("zero diagonal; Jacobi preconditioner undefined")
        P = spla.LinearOperator(A.shape, matvec=lambda y: y / d)
        it = [0]

        def cb(_):
            it[0] += 1

        x, flag = spla.gmres(A, b, rtol=1e-12, atol=0.0, restart=200, maxiter=50, M=P,
                             callback=cb, callback_type="pr_norm")
        info = {"method": "gmres", "iterations": it[0], "flag": int(flag)}
        if flag != 0:
            res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
            raise SolverError(f"GMRES did not converge (flag {flag}, rel. residual {res:.2e})",
                              info=info)
    X[free] = x
    res = float(np.linalg.norm(A @ x - b) / np.linalg.norm(b))
    return X, res, info


def energy_terms(system, u, v):
    """Quadrature evaluation of every term of the tested-with-solution identity."""
    disc, p = system.disc, system.params
    mesh, sm = disc.mesh, disc.smesh
    fn, f1 = system.frame_n, system.frame_np1
    dt = p.dt
    w = mesh.qw
    U, Un = mesh.values(u), mesh.values(system.u_n)
    dU = U - Un
    Ms = structure_mass(sm)
    vh = system.v_half
    D = sym_gradient(fn, u)
    div = transformed_divergence(fn, u)
    Ts = boundary_traces(disc)
    X = np.concatenate([u, v])
    comps = (1,) if p.gamma_constraint == "zero_z_penalty_r" else (0, 1)
    gap_sq = sum(float(np.sum(disc.gamma.w * fn.S * (Ts[c] @ X) ** 2)) for c in comps)
    sq = lambda a: np.einsum("qi,qi->q", a, a)  # noqa: E731
    t = {
        "kin_new": 0.5 * float(np.sum(w * fn.J * sq(U))),
        "kin_old": 0.5 * float(np.sum(w * fn.J * sq(Un))),
        "kin_inc": 0.5 * float(np.sum(w * fn.J * sq(dU))),
        "geom": 0.5 * float(np.sum(w * (f1.J - fn.J) * sq(U))),
        "kin_np1": 0.5 * float(np.sum(w * f1.J * sq(U))),
        "visc": 2.0 * p.nu * dt * float(np.sum(w * fn.J * np.einsum("qij,qij->q", D, D))),
        "div_sq": float(np.sum(w * div**2)),
        "struct_new": 0.5 * float(v @ (Ms @ v)),
        "struct_half": 0.5 * float(vh @ (Ms @ vh)),
        "struct_inc": 0.5 * float((v - vh) @ (Ms @ (v - vh))),
        "gap_sq": gap_sq,
        "pressure_work": float(system.pressure_load @ X),
        "noise_work": float(system.noise_vector @ X),
    }
    t["penalty_div"] = p.kappa_div * dt * t["div_sq"]
    t["penalty_bnd"] = p.kappa_bnd * dt * gap_sq
    return t


@functools.lru_cache(maxsize=16)
def structure_mass(sm):
    """Two-component structure mass matrix (cached per mesh)."""
    return sp.block_diag([weighted_mass(sm, 1.0)] * 2, format="csr")


def audit_defect(t):
    lhs = (t["kin_new"] - t["kin_old"] + t["kin_inc"] + t["geom"] + t["visc"] + t["penalty_div"]
           + t["struct_new"] - t["struct_half"] + t["struct_inc"] + t["penalty_bnd"])
    return lhs - t["pressure_work"] - t["noise_work"]


def fluid_step(system, step=None):
    """Solve an assembled system and audit the discrete energy identity."""
    disc, p = system.disc, system.params
    nu_ = disc.mesh.n_dofs
    X, res, info = _solve(system)
    iters = 1
    if p.advection == "picard":
        w = system.w
        for iters in range(2, p.picard_max + 2):
            u = X[:nu_]
            beta = disc.mesh.values(u) - w
            B = advection_matrix(disc, system.frame_n, beta, p.dt, system.matrix.shape)
            system.matrix = (system.info["base"] + B).tocsr()
            system.advection = B
            Xn, res, info = _solve(system)
            delta = np.linalg.norm(Xn - X) / max(np.linalg.norm(Xn), 1e-300)
            X = Xn
            if delta <= p.picard_tol:
                break
        else:
            raise SolverError("Picard iteration for the advection did not converge", step=step,
                              info={"last_increment": float(delta)})
    if res > 1e-10:
        raise SolverError(f"linear solve residual {res:.2e} above 1e-10", step=step, info=info)
    u, v = X[:nu_], X[nu_:]
    t = energy_terms(system, u, v)
    adv = float(X @ (system.advection @ X))
    return FluidStepResult(u, v, float(np.sqrt(t["div_sq"])), float(abs(audit_defect(t))),
                           float(np.sqrt(t["gap_sq"])), adv, res, t, iters)


def divergence_norm(frame, u):
    """``|| div^eta u ||_{L^2(O)}`` by bulk quadrature."""
    div = transformed_divergence(frame, u)
    return float(np.sqrt(np.sum(frame.mesh.qw * div**2)))
