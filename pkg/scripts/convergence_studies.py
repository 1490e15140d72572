"""Refinement, penalty, time-shift and interpolant-difference tables.

Uses the soft-structure base physics of the statistical acceptance checks
unless ``--config`` is given.

    python3 scripts/convergence_studies.py --study all --paths 16
"""

import argparse
import json

from fsisplit.config import load_config
from fsisplit.harness import difference_decay, penalty_study, refinement_study, timeshift_study
from fsisplit.io import _json_default
from fsisplit.verification import study_base


def table(rows, keys):
    print("  ".join(f"{k:>12s}" for k in keys))
    for r in rows:
        print("  ".join(f"{r[k]:12.5g}" if isinstance(r[k], float) else f"{r[k]!s:>12}" for k in keys))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--study", choices=["all", "refinement", "penalty", "timeshift", "difference"],
                    default="all")
    ap.add_argument("--config")
    ap.add_argument("--paths", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out")
    a = ap.parse_args()
    base = load_config(a.config)[0] if a.config else study_base()
    kw = dict(M=a.paths, master_seed=a.seed, workers=a.workers)
    out = {}
    if a.study in ("all", "refinement"):
        r = out["refinement"] = refinement_study(base, [16, 32, 64], **kw)
        print("refinement (means over paths)")
        table([{"N": x["N"], "max_E": x["max_E"]["mean"], "sum_D": x["sum_D"]["mean"]} for x in r["rows"]],
              ["N", "max_E", "sum_D"])
        print(f"spread {r['spread']}\n")
    if a.study in ("all", "penalty"):
        r = out["penalty"] = penalty_study(base.replace(N=32), [1e2, 1e3, 1e4], **(kw | {"M": min(a.paths, 8)}))
        print("penalty")
        table(r["rows"], ["kappa", "div_L2L2"])
        print(f"slope {r['slope']}\n")
    if a.study in ("all", "timeshift"):
        r = out["timeshift"] = timeshift_study(base.replace(N=64), (2, 4, 8, 16), **kw)
        print(f"time shift: h = {r['h']}")
        for row in r["rows"]:
            print(f"  {row['field']:8s} " + " ".join(f"{v:.4g}" for v in row["values"]))
        print(f"slopes u+ {r['u_plus']['slope']:.3f}  v# {r['v_sharp']['slope']:.3f}\n")
    if a.study in ("all", "difference"):
        r = out["difference"] = difference_decay(base, [16, 32, 64], **kw)
        print("interpolant differences")
        table(r["rows"], ["N", "diff_u", "diff_v", "diff_eta"])
        print(f"factors {r['factors']}")
    if a.out:
        with open(a.out, "w") as fh:
            json.dump(out, fh, indent=2, default=_json_default)


if __name__ == "__main__":
    main()
