import dataclasses

import numpy as np
import pytest

from fsisplit.ale import AdmissibilityReport
from fsisplit.config import InitialData, NoiseConfig, PressureSignal, SchemeConfig
from fsisplit.errors import ConfigurationError
from fsisplit.noise import WienerPath
from fsisplit.scheme import artificial_update, cutoff_flag, prepare, run_path, wiener_spec

SMALL = dict(nz=6, nr=3, ns=6, N=12, T=0.5)


def small(**kw):
    return SchemeConfig(**(SMALL | kw))


def quiet(**kw):
    return small(noise=NoiseConfig(model="zero"), p_in=PressureSignal(), **kw)


def report(ok):
    return AdmissibilityReport(1.0 if ok else 0.1, 0.0, 1.0, ok, True, True)


def test_all_zero_data_stays_zero():
    tr = run_path(quiet(initial=InitialData(eta_r_amplitude=0.0)))
    for name in ("u", "v", "eta", "eta_star", "v_half"):
        assert not np.any(getattr(tr, name))
    assert np.all(tr.ledger.E == 0)


def test_unforced_energy_decays():
    tr = run_path(quiet())
    L = tr.ledger
    spent = np.cumsum(L.D + L.D_bnd + L.C1 + 2 * L.C2)
    assert np.all(L.E[1:] + spent <= L.E[0] * (1 + 1e-12))
    assert np.all(np.diff(L.E) <= 1e-14)


def test_ledger_identities_and_signs():
    tr = run_path(small(), seed=3)
    L = tr.ledger
    assert np.max(np.abs(L.identity_structure)) <= 1e-12
    assert np.max(np.abs(L.identity_fluid)) <= 1e-12
    for k in ("D", "D_bnd", "C1", "C2"):
        assert np.all(L.rows[k] >= 0)
    assert all(np.all(np.isfinite(v)) for v in L.rows.values())


def test_same_seed_bitwise():
    a, b = run_path(small(), seed=42), run_path(small(), seed=42)
    assert a.u.tobytes() == b.u.tobytes() and a.eta.tobytes() == b.eta.tobytes()
    c = run_path(small(), seed=43)
    assert not np.array_equal(a.u, c.u)


def test_prefix_shared_when_increments_shared():
    cfg = small()
    spec = wiener_spec(cfg, 5)
    base = run_path(cfg, wiener=WienerPath(spec, cfg.dt))
    alt = run_path(cfg, wiener=WienerPath(spec, cfg.dt, {7: np.ones(cfg.noise.K)}))
    assert np.array_equal(base.u[:8], alt.u[:8])
    assert not np.array_equal(base.u[8], alt.u[8])


def test_flags_monotone_and_star_matches_before_stop():
    cfg = small()
    tr = run_path(cfg, 1, admissibility_hook=lambda n, r: report(False) if n == 4 else r)
    assert list(tr.theta[:4]) == [1] * 4 and not np.any(tr.theta[4:])
    assert np.all(np.diff(tr.theta) <= 0)
    assert tr.n_stop == 4
    assert np.array_equal(tr.eta_star[:4], tr.eta[:4])
    for n in range(4, cfg.N + 1):
        assert np.array_equal(tr.eta_star[n], tr.eta[3])
    assert np.all(tr.v_star[3:] == 0)


def test_cutoff_flag_examples():
    assert cutoff_flag([report(True)] * 5) == 1
    hist = [report(b) for b in (True, True, True, False, True)]
    assert [cutoff_flag(hist, n) for n in range(5)] == [1, 1, 1, 0, 0]


def test_artificial_update_examples():
    etas = [np.full(2, k) for k in range(5)]
    assert artificial_update(etas, [1] * 5, 4) is etas[4]
    assert artificial_update(etas, [1, 1, 0, 0], 3) is etas[1]
    assert all(artificial_update(etas, [1, 1, 1, 0, 0], n) is etas[2] for n in (3, 4))
    with pytest.raises(ValueError):
        artificial_update(etas, [0, 0], 1)


def test_inadmissible_initial_data_rejected():
    with pytest.raises(ConfigurationError):
        prepare(small(delta1=1.0, initial=InitialData(eta_r_amplitude=0.0)))
    with pytest.raises(ConfigurationError):
        prepare(small(initial=InitialData(eta_r_amplitude=-0.9)))


def test_stopping_times_consistent():
    tr = run_path(small(), 0)
    assert tr.n_stop * tr.dt <= tr.t_stop_jacobian_gauge + 1e-12
    assert tr.n_stop == 12 and tr.t_stop == pytest.approx(0.5)


@pytest.mark.parametrize("mode", ["zero_z_penalty_r"])
def test_alternate_interface_constraint_runs(mode):
    tr = run_path(small(gamma_constraint=mode), 2)
    assert np.max(tr.ledger.fluid_audit) <= 1e-9


def test_picard_advection_runs():
    tr = run_path(small(advection="picard", N=4), 2)
    assert np.max(np.abs(tr.ledger.identity_fluid)) <= 1e-10


def test_replace_keeps_frozen_config():
    c = small()
    d = c.replace(N=24)
    assert d.N == 24 and c.N == 12
    assert dataclasses.is_dataclass(d)
