"""Command line entry point: ``fsisplit run|ensemble|verify|study``.

Exit codes: 0 success, 1 a verification check failed, 2 bad input
(configuration, missing file, bad arguments), 3 solver failure.
Only the output directory and the worker count may be overridden from the
environment (``FSISPLIT_OUT``, ``FSISPLIT_WORKERS``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import SchemeConfig, load_config
from .errors import ConfigurationError, SolverError

STUDIES = ("penalty", "refinement", "timeshift", "difference", "stopping")
EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3

_DEFAULT_SWEEPS = {
    "penalty": "8,32,128,512",
    "refinement": "16,32,64",
    "timeshift": "2,4,8,16",
    "difference": "16,32,64",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _config(path):
    if path is None:
        return SchemeConfig(), {}
    return load_config(path)


def _out_dir(args, default):
    return args.out or os.environ.get("FSISPLIT_OUT") or default


def _workers(args, extras):
    if args.workers is not None:
        return args.workers
    env = os.environ.get("FSISPLIT_WORKERS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigurationError(f"FSISPLIT_WORKERS must be an integer, got {env!r}") from None
    return int(extras.get("workers", 1))


def _parse_sweep(text, kind):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"--sweep must be comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ConfigurationError("--sweep is empty")
    if kind != "penalty":
        if any(v != int(v) or v < 1 for v in vals):
            raise ConfigurationError(f"{kind} sweep values must be positive integers")
        vals = [int(v) for v in vals]
    return vals


def cmd_run(args):
    from .io import write_trajectory
    from .scheme import run_path

    cfg, _ = _config(args.config)
    traj = run_path(cfg, args.seed, diagnostics=args.diagnostics)
    out = _out_dir(args, "fsisplit_run")
    write_trajectory(out, traj, fields=not args.no_fields)
    L = traj.ledger
    print(f"wrote {out}: N={traj.N} max E={L.E.max():.6g} n_stop={traj.n_stop} "
          f"audit={max(L.structure_audit.max(), L.fluid_audit.max()):.2e}")
    return EXIT_OK


def cmd_ensemble(args):
    from .harness import EnsembleSpec, run_ensemble

    cfg, extras = _config(args.config)
    M = args.paths if args.paths is not None else int(extras.get("paths", 16))
    seed = args.seed if args.seed is not None else int(extras.get("master_seed", 0))
    spec = EnsembleSpec(cfg, M, seed, workers=_workers(args, extras),
                        out_dir=_out_dir(args, "fsisplit_ensemble"))
    rep = run_ensemble(spec)
    for k in ("max_E", "sum_D", "div_sq", "t_stop"):
        if k in rep.estimates:
            e = rep[k]
            print(f"{k:>8s}  {e.mean:.6g} +- {e.stderr:.2g}  (M={e.M})")
    if rep.excluded:
        print(f"excluded {len(rep.excluded)} failed paths", file=sys.stderr)
    print(f"wrote {spec.out_dir}")
    return EXIT_OK


def cmd_verify(args):
    from .verification import run_all

    extras = {}
    if args.config is not None:
        # validates the file; the checks themselves use fixed, documented setups
        _, extras = load_config(args.config)
    checks = run_all(full=args.full, workers=_workers(args, extras))
    for c in checks:
        print(c.line(), flush=True)
    n_fail = sum(not c.passed for c in checks)
    print(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return EXIT_OK if n_fail == 0 else EXIT_CHECK


def cmd_study(args):
    from . import harness
    from .io import manifest, write_json

    if args.kind not in STUDIES:
        raise ConfigurationError(f"unknown study {args.kind!r}; choose from {', '.join(STUDIES)}")
    cfg, extras = _config(args.config)
    workers = _workers(args, extras)
    M = args.paths
    seed = args.seed if args.seed is not None else int(extras.get("master_seed", 0))
    kw = {"master_seed": seed, "workers": workers}
    if M is not None:
        kw["M"] = M
    sweep = _parse_sweep(args.sweep or _DEFAULT_SWEEPS.get(args.kind, ""), args.kind) \
        if args.kind != "stopping" else None
    if args.kind == "penalty":
        if len(sweep) < 2:
            raise ConfigurationError("penalty study needs at least 2 kappa values")
        res = harness.penalty_study(cfg, sweep, **kw)
        print(f"slope {res['slope']}" if res["status"] == "ok" else "below floor, no slope")
    elif args.kind == "refinement":
        res = harness.refinement_study(cfg, sweep, **kw)
        print(f"spread {res['spread']}  uniform={res['uniform']}")
    elif args.kind == "timeshift":
        res = harness.timeshift_study(cfg, tuple(sweep), **kw)
        print(f"u_plus {res['u_plus']}  v_sharp {res['v_sharp']}")
    elif args.kind == "difference":
        res = harness.difference_decay(cfg, sweep, **kw)
        print(f"factors {res['factors']}")
    else:
        res = harness.stopping_stats(cfg, **kw)
        print(f"fraction n_stop>=1: {res['fraction_positive']}  reached T: {res['fraction_full']}")
    out = _out_dir(args, None)
    if out:
        os.makedirs(out, exist_ok=True)
        write_json(os.path.join(out, "manifest.json"), manifest(cfg, study=args.kind, sweep=sweep,
                                                                master_seed=seed))
        write_json(os.path.join(out, f"{args.kind}.json"), res)
        print(f"wrote {out}")
    elif args.json:
        print(json.dumps(res, indent=2, default=float))
    return EXIT_OK


def build_parser():
    p = _Parser(prog="fsisplit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed_help="path seed"):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, help=seed_help)
        sp.add_argument("--out", help="output directory (env FSISPLIT_OUT)")
        return sp

    r = common(sub.add_parser("run", help="simulate one path"))
    r.add_argument("--no-fields", action="store_true", help="skip fields/*.bin")
    r.add_argument("--diagnostics", action="store_true", help="also write diagnostics.csv")
    r.set_defaults(func=cmd_run, seed=0)

    e = common(sub.add_parser("ensemble", help="Monte Carlo ensemble"), "master seed")
    e.add_argument("--paths", type=int, help="number of paths M")
    e.add_argument("--workers", type=int, help="worker processes (env FSISPLIT_WORKERS)")
    e.set_defaults(func=cmd_ensemble)

    v = sub.add_parser("verify", help="run the acceptance checks")
    v.add_argument("--config", help="optional config file (validated only)")
    v.add_argument("--full", action="store_true", help="include the Monte Carlo checks")
    v.add_argument("--workers", type=int)
    v.set_defaults(func=cmd_verify)

    s = common(sub.add_parser("study", help="parameter study"), "master seed")
    s.add_argument("kind", help="|".join(STUDIES))
    s.add_argument("--sweep", help="comma-separated values (kappa, N, or h multiples)")
    s.add_argument("--paths", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--json", action="store_true", help="print the full result")
    s.set_defaults(func=cmd_study)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"fsisplit: configuration error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as exc:
        step = getattr(exc, "step", None)
        print(f"fsisplit: solver failure at step {step}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
