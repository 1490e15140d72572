import csv
import json
import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fsisplit.config import SchemeConfig
from fsisplit.harness import EnsembleSpec, run_ensemble
from fsisplit.io import MAGIC, read_field, write_field, write_trajectory
from fsisplit.scheme import run_path

GOLDEN = Path(__file__).parent / "golden"
CFG = SchemeConfig(nz=4, nr=2, ns=4, N=5, T=0.25)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    write_trajectory(out, run_path(CFG, 3))
    return out


def test_energy_header_golden(run_dir):
    with open(run_dir / "energies.csv") as fh:
        rows = list(csv.reader(fh))
    assert ",".join(rows[0]) == (GOLDEN / "energies_header.csv").read_text().strip()
    assert len(rows) == CFG.N + 2


def test_energy_values_parse(run_dir):
    with open(run_dir / "energies.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["n"]) for r in rows] == list(range(CFG.N + 1))
    assert rows[-1]["D"] == ""
    assert all(float(r["E"]) >= 0 for r in rows)


def test_manifest_has_reproduction_keys(run_dir):
    m = json.loads((run_dir / "manifest.json").read_text())
    assert m["config_sha256"] == CFG.digest()
    assert m["seed"] == 3
    assert {"version", "numpy", "scipy", "python", "config"} <= set(m)
    assert SchemeConfig.from_dict(m["config"]) == CFG


def test_rerun_from_manifest_is_bitwise(run_dir):
    m = json.loads((run_dir / "manifest.json").read_text())
    tr = run_path(SchemeConfig.from_dict(m["config"]), m["seed"])
    assert read_field(run_dir / "fields" / "u.bin").tobytes() == tr.u.tobytes()


def test_field_layout(tmp_path):
    a = np.arange(6, dtype=float).reshape(2, 3)
    p = tmp_path / "a.bin"
    write_field(p, a)
    raw = p.read_bytes()
    assert raw[:4] == MAGIC
    assert struct.unpack("<I", raw[4:8]) == (2,)
    assert struct.unpack("<2Q", raw[8:24]) == (2, 3)
    assert np.frombuffer(raw[24:], "<f8").tolist() == list(range(6))


@given(arrays(np.float64, st.tuples(st.integers(0, 4), st.integers(1, 4)),
              elements=st.floats(allow_nan=False, width=64)))
def test_field_round_trip(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("f") / "x.bin"
    write_field(p, a)
    assert np.array_equal(read_field(p), a)


def test_bad_field_rejected(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"NOPE")
    with pytest.raises(ValueError):
        read_field(p)


def test_ensemble_outputs(tmp_path):
    spec = EnsembleSpec(CFG, 2, 5, ("energy",), out_dir=str(tmp_path))
    rep = run_ensemble(spec)
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["master_seed"] == 5 and m["seeds"] == rep.seeds
    s = json.loads((tmp_path / "stats.json").read_text())
    assert s["paths_used"] == 2
    assert (tmp_path / "paths.csv").read_text().splitlines()[0].startswith("seed,")
