"""Output artifacts: energies CSV, manifest/stats JSON, binary field snapshots.

Binary field layout (``fields/*.bin``), all little-endian::

    4 bytes   magic  b"FSIB"
    uint32    ndim
    uint64    dims[ndim]
    float64   data, row-major
"""

from __future__ import annotations

import csv
import json
import os
import platform
import struct
import sys

import numpy as np

MAGIC = b"FSIB"

ENERGY_COLUMNS = (
    "n", "t", "E", "E_half", "D", "D_bnd", "C1", "C2", "pressure_work", "noise_work",
    "structure_audit", "fluid_audit", "advection_work", "div_norm", "boundary_gap",
    "theta", "inf_J", "gauge", "margin", "star_inf_J",
)
STEP_COLUMNS = ENERGY_COLUMNS[3:15]


def package_version():
    from . import __version__

    return __version__


def write_field(path, array):
    a = np.ascontiguousarray(array, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", a.ndim))
        fh.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        fh.write(a.tobytes(order="C"))


def read_field(path):
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not an FSIB field file")
        (ndim,) = struct.unpack("<I", fh.read(4))
        dims = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != int(np.prod(dims)):
        raise ValueError(f"{path}: payload size does not match header")
    return data.reshape(dims)


def _fmt(x):
    return repr(float(x))


def write_energies(path, traj):
    L = traj.ledger
    N = traj.N
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ENERGY_COLUMNS)
        for n in range(N + 1):
            rep = traj.reports[n]
            row = [n, _fmt(n * traj.dt), _fmt(L.E[n])]
            row += [_fmt(L.rows[k][n]) if n < N else "" for k in STEP_COLUMNS]
            row += [int(traj.theta[n]), _fmt(rep.inf_J), _fmt(rep.sobolev_s_norm), _fmt(rep.margin),
                    _fmt(traj.star_inf_J[n])]
            w.writerow(row)


DIAGNOSTIC_COLUMNS = ("step", "div_norm", "boundary_gap", "audit_residual", "iterations")


def write_diagnostics(path, rows):
    """Per-step fluid diagnostics, one row per step."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DIAGNOSTIC_COLUMNS)
        for r in rows:
            w.writerow([r[k] if k in ("step", "iterations") else _fmt(r[k]) for k in DIAGNOSTIC_COLUMNS])


def manifest(config, **extra):
    import scipy

    return {
        "config": config.to_dict(),
        "config_sha256": config.digest(),
        "package": "fsisplit",
        "version": package_version(),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
        **extra,
    }


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def trajectory_stats(traj):
    L = traj.ledger
    return {
        "N": traj.N, "dt": traj.dt, "seed": traj.seed,
        "max_E": float(L.E.max()), "final_E": float(L.E[-1]),
        "sum_D": float(np.sum(L.D)), "sum_D_bnd": float(np.sum(L.D_bnd)),
        "sum_C1": float(np.sum(L.C1)), "sum_C2": float(np.sum(L.C2)),
        "max_structure_audit": float(L.structure_audit.max()),
        "max_fluid_audit": float(L.fluid_audit.max()),
        "n_stop": traj.n_stop, "t_stop": traj.t_stop, "t_stop_jacobian_gauge": traj.t_stop_jacobian_gauge,
        "wall_time_s": traj.wall_time,
    }


def write_trajectory(out_dir, traj, fields=True, **manifest_extra):
    os.makedirs(out_dir, exist_ok=True)
    write_energies(os.path.join(out_dir, "energies.csv"), traj)
    write_json(os.path.join(out_dir, "manifest.json"),
               manifest(traj.config, seed=traj.seed, **manifest_extra))
    write_json(os.path.join(out_dir, "stats.json"), trajectory_stats(traj))
    if traj.diagnostics:
        write_diagnostics(os.path.join(out_dir, "diagnostics.csv"), traj.diagnostics)
    if fields:
        fd = os.path.join(out_dir, "fields")
        os.makedirs(fd, exist_ok=True)
        for name in ("u", "v", "eta", "eta_star", "v_half"):
            write_field(os.path.join(fd, f"{name}.bin"), getattr(traj, name))


def write_ensemble(out_dir, spec, report):
    os.makedirs(out_dir, exist_ok=True)
    write_json(os.path.join(out_dir, "manifest.json"),
               manifest(spec.config, master_seed=spec.master_seed, paths=spec.M,
                        seeds=report.seeds, stats=list(spec.stats)))
    write_json(os.path.join(out_dir, "stats.json"), report.to_dict())
    ok = [p for p in report.paths if p.get("ok")]
    if ok:
        keys = [k for k in ok[0] if k not in ("ok",)]
        with open(os.path.join(out_dir, "paths.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(keys)
            for p in ok:
                w.writerow([p[k] for k in keys])
