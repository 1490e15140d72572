"""Time marching: cutoff, artificial displacement, the two sub-steps, energy ledger."""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field

import numpy as np

from .ale import admissibility, ale_velocity, build_frame, interpolated_norm, structure_norms
from .config import SchemeConfig
from .discretization import Discretization, build_discretization
from .errors import ConfigurationError, SolverError
from .fluid import FluidParams, NoiseLoad, assemble_fluid_system, constrained_mask, fluid_step
from .noise import WienerPath, WienerSpec, make_noise_model, noise_load
from .structure import assemble_Le, structure_step

LEDGER_FIELDS = (
    "E_half", "E_next", "D", "D_bnd", "C1", "C2", "pressure_work", "noise_work",
    "structure_audit", "fluid_audit", "identity_structure", "identity_fluid",
    "advection_work", "div_norm", "boundary_gap", "solve_residual",
)


@dataclass
class EnergyLedger:
    """Per-step energy bookkeeping; ``E`` has N+1 entries, the rest N."""

    E: np.ndarray
    rows: dict

    def __getattr__(self, name):
        rows = self.__dict__.get("rows", {})
        if name in rows:
            return rows[name]
        raise AttributeError(name)

    @property
    def N(self):
        return self.E.size - 1

    def total_dissipation(self):
        return float(np.sum(self.rows["D"]))


@dataclass
class Setup:
    """Everything derived from a config that is shared by all its paths."""

    config: SchemeConfig
    disc: Discretization
    Le: object
    noise_model: object
    params: FluidParams
    delta2: float
    u0: np.ndarray
    v0: np.ndarray
    eta0: np.ndarray


def initial_state(config, disc):
    mesh, sm = disc.mesh, disc.smesh
    L = config.L
    bump = lambda x: 16 * x**2 * (L - x) ** 2 / L**4  # noqa: E731
    dbump = lambda x: 32 * x * (L - x) * (L - 2 * x) / L**4  # noqa: E731
    prof = sm.interpolate(bump, dbump)
    ic = config.initial
    eta0 = np.concatenate([ic.eta_z_amplitude * prof, ic.eta_r_amplitude * prof])
    v0 = np.concatenate([np.zeros(sm.ndof), ic.v_r_amplitude * prof])
    u0 = mesh.interpolate(lambda z, r: (ic.u0_shear * r * (2 - r), 0.0))
    u0[constrained_mask(disc, config.gamma_constraint)[: mesh.n_dofs]] = 0.0
    return u0, v0, eta0


def default_delta2(eta0, smesh, s):
    gauge = interpolated_norm(*structure_norms(eta0, smesh), s)
    return 1.0 / max(2.0 * gauge, 1.0)


@functools.lru_cache(maxsize=8)
def prepare(config: SchemeConfig) -> Setup:
    """Build meshes, operators and initial data; reject inadmissible initial data."""
    disc = build_discretization(config.L, config.nz, config.nr, config.ns)
    Le = assemble_Le(disc.smesh, config.c0, config.c1, config.c2,
                     test_mode=config.allow_degenerate_elastic)
    nc = config.noise
    noise_model = make_noise_model(nc.model, disc, nc.K, nc.amplitude)
    params = FluidParams(config.nu, config.kappa_div_value, config.kappa_bnd_value, config.dt,
                         config.gamma_constraint, config.advection, config.solver)
    u0, v0, eta0 = initial_state(config, disc)
    d2 = config.delta2 if config.delta2 is not None else default_delta2(eta0, disc.smesh, config.s)
    rep = admissibility(eta0, disc.smesh, config.delta1, d2, config.s, config.gamma_inj)
    if not rep.admissible:
        raise ConfigurationError(
            f"initial displacement not admissible: inf J={rep.inf_J:.4g} (need > {config.delta1}), "
            f"gauge={rep.sobolev_s_norm:.4g} (need < {1 / d2:.4g}), "
            f"margin={rep.margin:.4g} (need > {config.gamma_inj})")
    return Setup(config, disc, Le, noise_model, params, float(d2), u0, v0, eta0)


def wiener_spec(config, seed):
    nc = config.noise
    return WienerSpec.from_profile(nc.K, nc.profile, nc.scale, nc.decay, seed)


def cutoff_flag(reports, n=None):
    """Running-minimum admissibility flag through step ``n`` (default: all)."""
    upto = reports if n is None else reports[: n + 1]
    return int(all(r.admissible for r in upto))


def artificial_update(eta_history, flags, n):
    """``eta*^n``: the displacement at the last index ``k <= n`` with flag 1."""
    ks = [k for k in range(n + 1) if flags[k] == 1]
    if not ks:
        raise ValueError("no admissible index; initial data must be admissible")
    return eta_history[ks[-1]]


@dataclass
class Trajectory:
    config: SchemeConfig
    seed: int
    dt: float
    u: np.ndarray  # (N+1, n_u)
    v: np.ndarray  # (N+1, n_v)
    eta: np.ndarray  # (N+1, n_v)
    eta_star: np.ndarray  # (N+1, n_v)
    v_half: np.ndarray  # (N, n_v)
    theta: np.ndarray  # (N+1,) running flags
    reports: list
    star_inf_J: np.ndarray  # (N+1,) inf J of the eta* frames
    ledger: EnergyLedger
    n_stop: int
    t_stop: float  # first failure time of the running flag on eta_N, capped at T
    t_stop_jacobian_gauge: float  # same with the Jacobian and gauge criteria only
    wall_time: float
    frames: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def N(self):
        return self.u.shape[0] - 1

    @property
    def v_star(self):
        """``theta(eta^{n+1}) v^{n+1/2}`` per interval."""
        return self.theta[1:, None] * self.v_half

    def times(self):
        return self.dt * np.arange(self.N + 1)


def run_path(config, seed=0, *, wiener=None, keep_frames=False, diagnostics=False,
             admissibility_hook=None, setup=None):
    """Simulate one path of the splitting scheme.

    ``wiener`` replaces the seeded increments (e.g. a :class:`WienerPath`
    with overrides).  ``admissibility_hook(n, report) -> report`` can alter
    the report of ``eta^n`` before it enters the cutoff; tests use it to
    force inadmissibility.
    """
    t_wall = time.perf_counter()
    st = setup or prepare(config)
    disc, Le, params = st.disc, st.Le, st.params
    sm = disc.smesh
    N, dt = config.N, config.dt
    wiener = wiener or WienerPath(wiener_spec(config, seed), dt)
    thresholds = (config.delta1, st.delta2, config.s, config.gamma_inj)

    nu_, nv = disc.mesh.n_dofs, sm.n_dofs
    U = np.zeros((N + 1, nu_))
    V = np.zeros((N + 1, nv))
    ETA = np.zeros((N + 1, nv))
    ETA_S = np.zeros((N + 1, nv))
    VH = np.zeros((N, nv))
    theta = np.zeros(N + 1, dtype=int)
    star_J = np.zeros(N + 1)
    rows = {k: np.zeros(N) for k in LEDGER_FIELDS}
    E = np.zeros(N + 1)

    U[0], V[0], ETA[0] = st.u0, st.v0, st.eta0
    rep = admissibility(ETA[0], sm, *thresholds)
    if admissibility_hook is not None:
        rep = admissibility_hook(0, rep)
    if not rep.admissible:
        raise ConfigurationError("initial displacement not admissible")
    reports = [rep]
    theta[0] = 1
    ETA_S[0] = ETA[0]
    frame_n = build_frame(ETA_S[0], disc)
    star_J[0] = frame_n.inf_J
    frames = [frame_n] if keep_frames else []
    diag = []
    wq = disc.mesh.qw

    def kinetic(frame, u):
        Uq = disc.mesh.values(u)
        return 0.5 * float(np.sum(wq * frame.J * np.einsum("qc,qc->q", Uq, Uq)))

    E[0] = kinetic(frame_n, U[0]) + 0.5 * (Le.l2_sq(V[0]) + Le.energy(ETA[0]))
    n_stop = N
    for n in range(N):
        # structure sub-step; its displacement is kept as eta^{n+1}
        s = structure_step(ETA[n], V[n], Le, dt)
        ETA[n + 1] = s.eta_half
        VH[n] = s.v_half

        rep = admissibility(ETA[n + 1], sm, *thresholds)
        if admissibility_hook is not None:
            rep = admissibility_hook(n + 1, rep)
        reports.append(rep)
        theta[n + 1] = theta[n] * int(rep.admissible)
        if theta[n + 1]:
            ETA_S[n + 1] = ETA[n + 1]
            frame_np1 = build_frame(ETA_S[n + 1], disc)
        else:
            if theta[n] and n_stop == N:
                n_stop = n + 1
            ETA_S[n + 1] = ETA_S[n]
            frame_np1 = frame_n
        star_J[n + 1] = frame_np1.inf_J
        w = ale_velocity(frame_n, frame_np1, dt)

        inc = wiener.increment(n)
        if getattr(st.noise_model, "tag", "zero") == "zero":
            load = NoiseLoad.zero(disc)
        else:
            cols = st.noise_model.eval(U[n], V[n], ETA_S[n])
            load = noise_load(cols, inc)
        t0, t1 = n * dt, (n + 1) * dt
        pp = (config.p_in.average(t0, t1), config.p_out.average(t0, t1))
        sysm = assemble_fluid_system(frame_n, frame_np1, U[n], w, s.v_half, params, pp, load)
        try:
            r = fluid_step(sysm, step=n)
        except SolverError as exc:
            if exc.step is None:
                raise SolverError(str(exc), step=n, info=exc.info) from exc
            raise
        U[n + 1], V[n + 1] = r.u_np1, r.v_np1

        t = r.terms
        e_half = t["kin_old"] + 0.5 * (Le.l2_sq(s.v_half) + Le.energy(s.eta_half))
        E[n + 1] = t["kin_np1"] + t["struct_new"] + 0.5 * Le.energy(ETA[n + 1])
        C1 = 0.5 * s.dissipation
        C2 = 0.5 * (t["kin_inc"] + t["struct_inc"])
        D = t["visc"] + t["penalty_div"]
        row = {
            "E_half": e_half, "E_next": E[n + 1], "D": D, "D_bnd": t["penalty_bnd"],
            "C1": C1, "C2": C2, "pressure_work": t["pressure_work"], "noise_work": t["noise_work"],
            "structure_audit": s.audit_residual, "fluid_audit": r.audit_residual,
            "identity_structure": e_half + C1 - E[n],
            "identity_fluid": E[n + 1] + D + t["penalty_bnd"] + 2 * C2 - e_half
            - t["pressure_work"] - t["noise_work"],
            "advection_work": r.advection_work, "div_norm": r.div_norm,
            "boundary_gap": r.boundary_gap, "solve_residual": r.solve_residual,
        }
        for k, val in row.items():
            rows[k][n] = val
        if diagnostics:
            diag.append({"step": n, "div_norm": r.div_norm, "boundary_gap": r.boundary_gap,
                         "audit_residual": r.audit_residual, "iterations": r.iterations})
        if keep_frames:
            frames.append(frame_np1)
        frame_n = frame_np1

    t_stop = min(config.T, n_stop * dt)
    fail_jg = [k for k, rp in enumerate(reports) if not (rp.jacobian_ok and rp.norm_ok)]
    t_stop_jacobian_gauge = min(config.T, fail_jg[0] * dt) if fail_jg else config.T
    return Trajectory(config, int(seed), dt, U, V, ETA, ETA_S, VH, theta, reports, star_J,
                      EnergyLedger(E, rows), int(n_stop), float(t_stop), float(t_stop_jacobian_gauge),
                      time.perf_counter() - t_wall, frames, diag)
