"""Monte Carlo ensembles and parameter studies.

Each path is reduced to a small dict of scalars inside the worker, so
ensembles never ship full trajectories between processes.  Estimators are
plain means over paths in seed order (``math.fsum``) with standard errors
``std / sqrt(M)``.
"""

from __future__ import annotations

import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import SchemeConfig
from .errors import ConfigurationError, SolverError
from .interpolation import interval_difference, time_shift_norm
from .scheme import run_path

DEFAULT_STATS = ("energy", "timeshift", "difference", "stopping")
DEFAULT_H_MULTIPLES = (2, 4, 8, 16)


def path_seeds(master_seed, M):
    """Distinct 64-bit seeds, reproducible from the master seed."""
    children = np.random.SeedSequence(int(master_seed)).spawn(int(M))
    seeds = [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]
    if len(set(seeds)) != len(seeds):  # astronomically unlikely
        raise RuntimeError("seed collision")
    return seeds


def summarize_path(config, seed, stats=DEFAULT_STATS, h_multiples=DEFAULT_H_MULTIPLES):
    """Run one path and reduce it to scalars; failures are returned, not raised."""
    try:
        tr = run_path(config, seed)
    except SolverError as exc:
        return {"seed": seed, "ok": False, "error": str(exc)}
    L = tr.ledger
    out = {
        "seed": seed, "ok": True,
        "max_E": float(np.max(L.E)),
        "sum_D": math.fsum(L.D), "sum_D_bnd": math.fsum(L.D_bnd),
        "sum_C1": math.fsum(L.C1), "sum_C2": math.fsum(L.C2),
        "div_sq": math.fsum(tr.dt * L.div_norm**2),
        "n_stop": tr.n_stop, "t_stop": tr.t_stop, "t_stop_jacobian_gauge": tr.t_stop_jacobian_gauge,
        "max_fluid_audit": float(np.max(L.fluid_audit)),
        "max_structure_audit": float(np.max(L.structure_audit)),
        "wall_time": tr.wall_time,
    }
    if "timeshift" in stats:
        for m in h_multiples:
            if m * tr.dt < config.T:
                h = m * tr.dt
                out[f"ts_u_plus_{m}"] = time_shift_norm(tr, "u_plus", h)
                out[f"ts_v_sharp_{m}"] = time_shift_norm(tr, "v_sharp", h)
    if "difference" in stats:
        out["diff_u"] = interval_difference(tr, "u", "u_tilde")
        out["diff_v"] = interval_difference(tr, "v", "v_tilde")
        out["diff_eta"] = interval_difference(tr, "eta", "eta_tilde")
    return out


def _summarize_star(args):
    try:
        return summarize_path(*args)
    except Exception as exc:  # keep the ensemble alive, record the failure
        return {"seed": args[1], "ok": False, "error": f"{type(exc).__name__}: {exc}",
                "traceback": traceback.format_exc()}


@dataclass
class EnsembleSpec:
    config: SchemeConfig
    M: int
    master_seed: int = 0
    stats: tuple = DEFAULT_STATS
    h_multiples: tuple = DEFAULT_H_MULTIPLES
    workers: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        if self.M < 1:
            raise ConfigurationError("ensemble needs M >= 1 paths")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")


@dataclass
class Estimate:
    mean: float
    stderr: float
    M: int

    def to_dict(self):
        return {"mean": self.mean, "stderr": self.stderr, "M": self.M}


def estimate(values):
    """Mean and standard error of an ordered sample (compensated summation)."""
    x = [float(v) for v in values]
    M = len(x)
    if M == 0:
        return Estimate(float("nan"), float("nan"), 0)
    mean = math.fsum(x) / M
    if M == 1:
        return Estimate(mean, 0.0, 1)
    var = math.fsum((xi - mean) ** 2 for xi in x) / (M - 1)
    return Estimate(mean, math.sqrt(var / M), M)


@dataclass
class EnsembleReport:
    config_digest: str
    master_seed: int
    seeds: list
    estimates: dict
    excluded: list
    paths: list = field(repr=False, default_factory=list)

    @property
    def M(self):
        return len(self.seeds) - len(self.excluded)

    def __getitem__(self, key):
        return self.estimates[key]

    def to_dict(self):
        return {
            "config_digest": self.config_digest,
            "master_seed": self.master_seed,
            "seeds": self.seeds,
            "paths_used": self.M,
            "excluded": self.excluded,
            "estimates": {k: v.to_dict() for k, v in self.estimates.items()},
        }


def run_ensemble(spec):
    seeds = path_seeds(spec.master_seed, spec.M)
    jobs = [(spec.config, s, spec.stats, spec.h_multiples) for s in seeds]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as ex:
            results = list(ex.map(_summarize_star, jobs))
    else:
        results = [_summarize_star(j) for j in jobs]
    ok = [r for r in results if r["ok"]]
    excluded = [{"seed": r["seed"], "error": r["error"]} for r in results if not r["ok"]]
    keys = [k for k in (ok[0] if ok else {}) if k not in ("seed", "ok")]
    est = {k: estimate([r[k] for r in ok]) for k in keys}
    report = EnsembleReport(spec.config.digest(), int(spec.master_seed), seeds, est, excluded, results)
    if spec.out_dir:
        from .io import write_ensemble

        write_ensemble(spec.out_dir, spec, report)
    return report


def _fit(x, y):
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def refinement_study(base, N_list, M=16, master_seed=0, growth_factor=2.0, workers=1):
    """``E[max_n E^n]`` and ``E[sum_n D^n]`` against N."""
    N_list = [int(n) for n in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be increasing")
    rows = []
    for N in N_list:
        rep = run_ensemble(EnsembleSpec(base.replace(N=N), M, master_seed, ("energy",), workers=workers))
        rows.append({"N": N, "max_E": rep["max_E"].to_dict(), "sum_D": rep["sum_D"].to_dict(),
                     "sum_C1": rep["sum_C1"].to_dict(), "sum_C2": rep["sum_C2"].to_dict()})
    for prev, row in zip(rows, rows[1:]):
        row["ratio_max_E"] = row["max_E"]["mean"] / prev["max_E"]["mean"]
        row["ratio_sum_D"] = row["sum_D"]["mean"] / prev["sum_D"]["mean"]
    spread = {}
    for key in ("max_E", "sum_D"):
        vals = [r[key]["mean"] for r in rows]
        spread[key] = max(vals) / min(vals) if min(vals) > 0 else float("inf")
    return {"rows": rows, "spread": spread,
            "uniform": all(v < growth_factor for v in spread.values()),
            "growth_factor": growth_factor}


def penalty_study(base, kappa_list, M=8, master_seed=0, floor=1e-10, workers=1):
    """Slope of ``log sqrt(E int ||div u||^2)`` against ``log kappa_div``."""
    kappa_list = [float(k) for k in kappa_list]
    if len(kappa_list) < 2:
        raise ValueError("penalty study needs at least 2 kappa values")
    norms, rows = [], []
    for k in kappa_list:
        rep = run_ensemble(EnsembleSpec(base.replace(kappa_div=k), M, master_seed, ("energy",),
                                        workers=workers))
        e = rep["div_sq"]
        norms.append(math.sqrt(e.mean))
        rows.append({"kappa": k, "div_L2L2": norms[-1], "div_sq": e.to_dict()})
    if max(norms) < floor:
        return {"rows": rows, "slope": None, "status": "floor"}
    slope, icpt = _fit(kappa_list, norms)
    return {"rows": rows, "slope": slope, "intercept": icpt, "status": "ok",
            "decades": math.log10(max(kappa_list) / min(kappa_list))}


def timeshift_study(base, h_multiples=DEFAULT_H_MULTIPLES, M=16, master_seed=0, workers=1):
    """Slopes of ``log E||T_h f - f||^2`` against ``log h`` for ``u+`` and ``v#``."""
    rep = run_ensemble(EnsembleSpec(base, M, master_seed, ("timeshift",), tuple(h_multiples),
                                    workers=workers))
    dt = base.dt
    hs = [m * dt for m in h_multiples]
    out = {"h": hs, "rows": []}
    for name in ("u_plus", "v_sharp"):
        vals = [rep[f"ts_{name}_{m}"].mean for m in h_multiples]
        out["rows"].append({"field": name, "values": vals})
        if max(vals) <= 0:
            out[name] = {"slope": None, "status": "degenerate"}
        else:
            s, c = _fit(hs, vals)
            out[name] = {"slope": s, "intercept": c, "status": "ok"}
    return out


def difference_decay(base, N_list, M=16, master_seed=0, min_factor=1.5, workers=1):
    """``E int ||f_N - f~_N||^2`` against N for u, v, eta."""
    rows = []
    for N in N_list:
        rep = run_ensemble(EnsembleSpec(base.replace(N=int(N)), M, master_seed, ("difference",),
                                        workers=workers))
        rows.append({"N": int(N)} | {k: rep[k].mean for k in ("diff_u", "diff_v", "diff_eta")})
    factors = {}
    for k in ("diff_u", "diff_v", "diff_eta"):
        factors[k] = [a[k] / b[k] if b[k] > 0 else float("inf") for a, b in zip(rows, rows[1:])]
    return {"rows": rows, "factors": factors,
            "decreasing": {k: all(f >= min_factor for f in v) for k, v in factors.items()}}


def stopping_stats(base, M=32, master_seed=0, workers=1):
    """Empirical distribution of the stopping times over M paths."""
    rep = run_ensemble(EnsembleSpec(base, M, master_seed, ("stopping",), workers=workers))
    ok = [r for r in rep.paths if r["ok"]]
    t = np.sort([r["t_stop"] for r in ok])
    tp = np.sort([r["t_stop_jacobian_gauge"] for r in ok])
    return {
        "M": len(ok), "excluded": rep.excluded,
        "t_stop": t.tolist(), "t_stop_jacobian_gauge": tp.tolist(),
        "cdf": [(float(x), float((i + 1) / len(t))) for i, x in enumerate(t)],
        "n_stop": [r["n_stop"] for r in ok],
        "fraction_positive": float(np.mean([r["n_stop"] >= 1 for r in ok])) if ok else float("nan"),
        "fraction_full": float(np.mean([r["t_stop"] >= base.T for r in ok])) if ok else float("nan"),
        "consistent": all(r["n_stop"] * base.dt <= r["t_stop_jacobian_gauge"] + 1e-12 for r in ok),
    }
