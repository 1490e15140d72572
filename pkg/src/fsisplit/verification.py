"""The acceptance checks, each returning a :class:`Check`.

``QUICK`` checks run in a few seconds together; ``STATISTICAL`` ones run
Monte Carlo ensembles and take up to a few minutes on one core.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .ale import admissibility, ale_velocity, build_frame, invert_phi
from .config import InitialData, NoiseConfig, PressureSignal, SchemeConfig
from .discretization import build_discretization, smooth_random_eta
from .fluid import FluidParams, NoiseLoad, assemble_fluid_system, constrained_mask, fluid_step
from .harness import difference_decay, penalty_study, refinement_study, stopping_stats, timeshift_study
from .noise import (DefaultMultiplicativeNoise, OscillatingNoise, WienerPath, WienerSpec,
                    ZeroNoise, sample_increment, verify_assumptions)
from .oracles import dense_fluid_matrix
from .scheme import prepare, run_path, wiener_spec
from .structure import assemble_Le, structure_step


@dataclass
class Check:
    name: str
    passed: bool
    value: object
    threshold: object
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: value={_short(self.value)} threshold={_short(self.threshold)}"


def _short(x):
    if isinstance(x, float):
        return f"{x:.4g}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_short(v) for v in x) + "]"
    return str(x)


def study_base(**changes):
    """Physics used by the statistical checks: default config with a soft structure.

    A bending stiffness of 0.01 keeps the structure period comparable to T,
    so dynamics stay resolved for every N in {16, 32, 64}.
    """
    return SchemeConfig(c2=0.01).replace(**changes)


def _random_eta(rng, sm, scale):
    e = scale * rng.standard_normal(sm.n_dofs)
    e[sm.mask] = 0.0
    return e


def check_structure_identity(samples=100, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        ns = int(rng.integers(2, 24))
        disc = build_discretization(1.0, 2, 2, ns)
        sm = disc.smesh
        c = rng.uniform(0, 2, 3)
        c[2] = max(c[2], 1e-3)
        Le = assemble_Le(sm, *c)
        eta, v = _random_eta(rng, sm, rng.uniform(0.01, 1)), _random_eta(rng, sm, rng.uniform(0.01, 3))
        dt = 10 ** rng.uniform(-3, -0.3)
        r = structure_step(eta, v, Le, dt)
        worst = max(worst, r.audit_residual / (r.energy_before + 1.0))
    return Check("1 structure energy identity", worst <= 1e-10, worst, 1e-10, {"samples": samples})


def _random_fluid_system(rng, disc, params=None, noise=True, pressure=True):
    sm, mesh = disc.smesh, disc.mesh
    e0, e1 = smooth_random_eta(rng, sm, 0.1), smooth_random_eta(rng, sm, 0.1)
    f0, f1 = build_frame(e0, disc), build_frame(e1, disc)
    dt = 10 ** rng.uniform(-2.5, -0.7)
    p = params or FluidParams(nu=rng.uniform(0.01, 1), kappa_div=10 ** rng.uniform(0, 4),
                              kappa_bnd=10 ** rng.uniform(0, 3), dt=dt,
                              gamma_constraint=rng.choice(["penalty_both", "zero_z_penalty_r"]))
    u = rng.standard_normal(mesh.n_dofs)
    u[constrained_mask(disc, p.gamma_constraint)[: mesh.n_dofs]] = 0.0
    vh = _random_eta(rng, sm, 1.0)
    P = tuple(rng.uniform(-2, 2, 2)) if pressure else (0.0, 0.0)
    nl = (NoiseLoad(0.3 * rng.standard_normal((mesh.nq, 2)), 0.3 * rng.standard_normal((sm.nq, 2)))
          if noise else None)
    return assemble_fluid_system(f0, f1, u, ale_velocity(f0, f1, p.dt), vh, p, P, nl)


def check_fluid_identity(samples=50, seed=1):
    rng = np.random.default_rng(seed)
    disc = build_discretization(1.0, 8, 4, 8)
    worst = 0.0
    for _ in range(samples):
        S = _random_fluid_system(rng, disc)
        r = fluid_step(S)
        t = r.terms
        scale = t["kin_old"] + t["struct_half"] + S.params.dt * sum(p * p for p in S.pressure_pair) + 1.0
        worst = max(worst, r.audit_residual / scale)
    return Check("2 fluid tested-with-solution identity", worst <= 1e-9, worst, 1e-9, {"samples": samples})


def _deterministic_config(N=128):
    return SchemeConfig(N=N, p_in=PressureSignal(), p_out=PressureSignal(),
                        noise=NoiseConfig(model="zero"))


def check_deterministic_dissipation(N=128):
    tr = run_path(_deterministic_config(N), seed=0)
    L = tr.ledger
    lhs = L.E[1:] + L.D + L.C1 + L.C2
    scale = L.E[0] + 1.0
    excess = float(np.max(lhs - L.E[:-1]) / scale)
    return Check("3 deterministic dissipation", excess <= 1e-9, excess, 1e-9, {"steps": N})


def check_advection_neutrality(N=32):
    worst = 0.0
    for adv in ("lagged", "picard"):
        cfg = SchemeConfig(N=N, advection=adv, initial=InitialData(u0_shear=1.0))
        tr = run_path(cfg, seed=3)
        L = tr.ledger
        scale = L.E[:-1] + 1.0
        worst = max(worst, float(np.max(np.abs(L.advection_work) / scale)))
    return Check("4 advection neutrality", worst <= 1e-12, worst, 1e-12)


def check_assembly_oracle(seed=2):
    rng = np.random.default_rng(seed)
    disc = build_discretization(1.0, 3, 3, 3)
    sm = disc.smesh
    worst = 0.0
    for gc in ("penalty_both", "zero_z_penalty_r"):
        e0, e1 = _random_eta(rng, sm, 0.03), _random_eta(rng, sm, 0.03)
        e0[: sm.ndof] *= 0.5
        f0, f1 = build_frame(e0, disc), build_frame(e1, disc)
        dt = 0.1
        p = FluidParams(0.3, 50.0, 20.0, dt, gamma_constraint=gc)
        u = rng.standard_normal(disc.mesh.n_dofs)
        S = assemble_fluid_system(f0, f1, u, ale_velocity(f0, f1, dt), _random_eta(rng, sm, 1.0), p)
        D = dense_fluid_matrix(1.0, 3, 3, 3, e0, e1, u, 0.3, 50.0, 20.0, dt, gc)
        worst = max(worst, float(np.max(np.abs(S.matrix.toarray() - D))))
    return Check("5 assembly oracle (3x3 mesh)", worst <= 1e-12, worst, 1e-12)


def check_penalty_decay(M=8, workers=1):
    res = penalty_study(study_base(), [1e2, 1e3, 1e4], M=M, workers=workers)
    s = res["slope"]
    ok = s is not None and -0.65 <= s <= -0.35
    return Check("6 penalty decay slope", ok, s, [-0.65, -0.35], res)


def check_timeshift(M=16, workers=1):
    res = timeshift_study(study_base(N=64), (2, 4, 8, 16), M=M, workers=workers)
    su, sv = res["u_plus"]["slope"], res["v_sharp"]["slope"]
    ok = su is not None and sv is not None and su >= 0.8 and sv >= 0.8
    return Check("7 time-shift modulus slopes (u+, v#)", ok, [su, sv], 0.8, res)


def check_uniform_in_N(M=16, workers=1):
    res = refinement_study(study_base(), [16, 32, 64], M=M, workers=workers)
    spread = [res["spread"]["max_E"], res["spread"]["sum_D"]]
    return Check("8 uniform-in-N energy estimates", max(spread) < 2.0, spread, 2.0, res)


def check_difference_decay(M=16, workers=1):
    res = difference_decay(study_base(), [16, 32, 64], M=M, workers=workers)
    f = res["factors"]["diff_u"]
    return Check("9 interpolant difference decay", min(f) >= 1.5, f, 1.5, res)


def check_cutoff_freeze(k=5):
    cfg = SchemeConfig(N=16, c2=0.01)

    def force(n, rep):
        if n == k:
            return dataclasses.replace(rep, jacobian_ok=False)
        return rep

    tr = run_path(cfg, seed=4, admissibility_hook=force)
    frozen = all(np.array_equal(tr.eta_star[n], tr.eta[k - 1]) for n in range(k, cfg.N + 1))
    before = all(np.array_equal(tr.eta_star[n], tr.eta[n]) for n in range(k))
    flags = list(tr.theta) == [1] * k + [0] * (cfg.N + 1 - k)
    evolves = not np.array_equal(tr.eta[-1], tr.eta[k - 1])

    # a genuine failure: a strong initial kick drives eta out of the admissible set
    kick = cfg.replace(initial=InitialData(eta_r_amplitude=0.05, v_r_amplitude=-8.0), N=32)
    tk = run_path(kick, seed=4)
    floor_ok = bool(np.all(tr.star_inf_J > cfg.delta1) and np.all(tk.star_inf_J > kick.delta1))
    kick_ok = tk.n_stop < kick.N and all(
        np.array_equal(tk.eta_star[n], tk.eta[tk.n_stop - 1]) for n in range(tk.n_stop, kick.N + 1))
    ok = frozen and before and flags and evolves and floor_ok and kick_ok
    return Check("10 cutoff / freeze semantics", ok, ok, True,
                 {"frozen": frozen, "identity_before_k": before, "flags": flags,
                  "eta_keeps_evolving": evolves, "jacobian_floor": floor_ok,
                  "natural_failure_step": tk.n_stop, "natural_freeze": kick_ok})


def check_causality(m=7):
    cfg = SchemeConfig(N=16)
    spec = wiener_spec(cfg, 11)
    base = WienerPath(spec, cfg.dt)
    prefix = {n: base.increment(n).dW for n in range(m)}
    alt = dict(prefix)
    alt[m] = base.increment(m).dW + 0.5
    a = run_path(cfg, 11, wiener=WienerPath(spec, cfg.dt, prefix))
    b = run_path(cfg, 11, wiener=WienerPath(spec, cfg.dt, alt))
    same = all(np.array_equal(getattr(a, f)[: m + 1], getattr(b, f)[: m + 1])
               for f in ("u", "v", "eta", "eta_star", "theta"))
    same = same and np.array_equal(a.v_half[: m + 1], b.v_half[: m + 1])
    differs = not np.array_equal(a.u[m + 1], b.u[m + 1])
    return Check("11 causality (shared increments)", same and differs, same, True,
                 {"diverges_after_m": differs, "m": m})


def check_noise_assumptions(samples=100, draws=100_000):
    disc = build_discretization(1.0, 8, 4, 8)
    reports = [verify_assumptions(mdl, samples, seed=5)
               for mdl in (ZeroNoise(disc, 8), DefaultMultiplicativeNoise(disc, 8))]
    worst = max(max(r["max_violation"]) for r in reports)
    adversarial = verify_assumptions(OscillatingNoise(disc, 8), samples, seed=5)
    spec = WienerSpec.from_profile(8, "power", 1.0, 2.0, seed=0)
    dt = 0.01
    x = np.array([sample_increment(spec, n, dt).dW for n in range(draws)])
    q = np.asarray(spec.q) * dt
    var = x.var(axis=0, ddof=1)
    z = np.abs(var - q) / (q * math.sqrt(2.0 / (draws - 1)))
    ok = worst <= 1e-12 and bool(np.all(z < 3.0)) and adversarial["holds"] == [True, True, False]
    return Check("12 noise assumptions and increment variance", ok, [worst, float(z.max())], [1e-12, 3.0],
                 {"shipped": reports, "adversarial": adversarial, "variance_z": z.tolist()})


def check_stopping_positive(M=32, workers=1):
    res = stopping_stats(study_base(), M=M, workers=workers)
    n_ok = sum(1 for n in res["n_stop"] if n >= 1)
    ok = n_ok == M and res["consistent"]
    return Check("13 stopping-time positivity", ok, f"{n_ok}/{M}", f"{M}/{M}", res)


def check_ale_roundtrip(frames=5, seed=6):
    rng = np.random.default_rng(seed)
    disc = build_discretization(1.0, 16, 8, 16)
    sm = disc.smesh
    worst_phi = worst_det = 0.0
    for _ in range(frames):
        eta = smooth_random_eta(rng, sm, 0.1)
        f = build_frame(eta, disc)
        z = np.sort(rng.uniform(0, 1, 50))
        y = invert_phi(sm.profile(eta, "z"), z, 1.0)
        worst_phi = max(worst_phi, float(np.max(np.abs(f.phi(y) - z))))
        worst_det = max(worst_det, float(np.max(np.abs(np.linalg.det(f.gradA) - f.J))))
    worst = max(worst_phi, worst_det)
    return Check("14 ALE round trip and Jacobian", worst <= 1e-12, [worst_phi, worst_det], 1e-12)


QUICK = (check_structure_identity, check_fluid_identity, check_deterministic_dissipation,
         check_advection_neutrality, check_assembly_oracle, check_cutoff_freeze, check_causality,
         check_noise_assumptions, check_ale_roundtrip)
STATISTICAL = (check_penalty_decay, check_timeshift, check_uniform_in_N, check_difference_decay,
               check_stopping_positive)
ORDER = (check_structure_identity, check_fluid_identity, check_deterministic_dissipation,
         check_advection_neutrality, check_assembly_oracle, check_penalty_decay, check_timeshift,
         check_uniform_in_N, check_difference_decay, check_cutoff_freeze, check_causality,
         check_noise_assumptions, check_stopping_positive, check_ale_roundtrip)


def run_all(full=False, workers=1):
    out = []
    for fn in ORDER:
        if not full and fn in STATISTICAL:
            continue
        t0 = time.perf_counter()
        kw = {"workers": workers} if fn in STATISTICAL else {}
        c = fn(**kw)
        c.seconds = time.perf_counter() - t0
        out.append(c)
    return out


def admissible_initial(cfg):
    """Admissibility report of a config's initial displacement."""
    st = prepare(cfg)
    return admissibility(st.eta0, st.disc.smesh, cfg.delta1, st.delta2, cfg.s, cfg.gamma_inj)
