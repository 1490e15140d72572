"""Run every acceptance check and write a JSON report.

    python3 scripts/acceptance_report.py --out results/acceptance.json
    python3 scripts/acceptance_report.py --quick     # skip the Monte Carlo checks
"""

import argparse
import json
import os
import time

from fsisplit.io import _json_default
from fsisplit.verification import run_all


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/acceptance.json")
    a = ap.parse_args()
    t0 = time.perf_counter()
    checks = run_all(full=not a.quick, workers=a.workers)
    for c in checks:
        print(f"{c.line()}  ({c.seconds:.1f}s)")
    os.makedirs(os.path.dirname(a.out) or ".", exist_ok=True)
    with open(a.out, "w") as fh:
        json.dump({"wall_time_s": time.perf_counter() - t0,
                   "checks": [{"name": c.name, "passed": c.passed, "value": c.value,
                               "threshold": c.threshold, "seconds": c.seconds, "detail": c.detail}
                              for c in checks]},
                  fh, indent=2, default=_json_default)
    print(f"wrote {a.out}")


if __name__ == "__main__":
    main()
