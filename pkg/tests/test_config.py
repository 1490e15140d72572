import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fsisplit.config import (CONFIG_SCHEMA, NoiseConfig, PressureSignal, SchemeConfig, load_config,
                             validate_config)
from fsisplit.errors import ConfigurationError


def test_round_trip_and_digest():
    c = SchemeConfig(N=20, noise=NoiseConfig(model="zero"), p_in=PressureSignal("step", 2.0))
    d = SchemeConfig.from_dict(json.loads(c.to_json()))
    assert d == c
    assert d.digest() == c.digest()
    assert c.replace(N=21).digest() != c.digest()


def test_defaults_resolve():
    c = SchemeConfig(N=40)
    assert c.dt == pytest.approx(1 / 40)
    assert c.kappa_div_value == 40.0 and c.kappa_bnd_value == 40.0
    assert SchemeConfig(kappa_div=5.0, kappa_bnd=2.0).kappa_bnd_value == 2.0


@pytest.mark.parametrize("bad", [{"foo": 1}, {"N": 0}, {"s": 2.0}, {"nu": 0},
                                 {"noise": {"model": "loud"}}, {"p_in": {"kind": "sine", "frequency": 1}},
                                 {"version": 99}])
def test_schema_rejects(bad):
    with pytest.raises(ConfigurationError):
        SchemeConfig.from_dict(bad)


def test_dataclass_range_checks():
    with pytest.raises(ConfigurationError):
        SchemeConfig(delta1=-1.0)
    with pytest.raises(ConfigurationError):
        SchemeConfig(gamma_inj=1.0)
    with pytest.raises(ConfigurationError):
        SchemeConfig(kappa_div=0.0)


def test_schema_is_valid_json_schema():
    import jsonschema

    jsonschema.Draft202012Validator.check_schema(CONFIG_SCHEMA)
    validate_config(SchemeConfig().to_dict())


def test_load_config_forms(tmp_path):
    p = tmp_path / "a.json"
    p.write_text(json.dumps({"N": 8}))
    cfg, extras = load_config(p)
    assert cfg.N == 8 and extras == {}
    p.write_text(json.dumps({"scheme": {"N": 8}, "paths": 4, "master_seed": 3}))
    cfg, extras = load_config(p)
    assert extras == {"paths": 4, "master_seed": 3}
    p.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_config(p)
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.json")


def test_pressure_signals():
    assert PressureSignal()(0.3) == 0
    assert PressureSignal("constant", 1.0, 0.5)(0.3) == 1.5
    s = PressureSignal("step", 2.0, 1.0, t_step=0.5)
    assert s(0.4) == 1.0 and s(0.6) == 3.0
    assert s.average(0.25, 0.75) == pytest.approx(2.0, abs=1e-12)


@given(st.floats(0.0, 1.0), st.floats(0.01, 0.5))
def test_sine_average_exact(t0, h):
    s = PressureSignal("sine", 1.3, 0.2, 0.7, 0.4)
    exact = 0.2 + 1.3 * 0.7 / (2 * np.pi * h) * (np.cos(2 * np.pi * t0 / 0.7 + 0.4)
                                                 - np.cos(2 * np.pi * (t0 + h) / 0.7 + 0.4))
    assert s.average(t0, t0 + h) == pytest.approx(exact, abs=1e-11)


def test_shipped_configs_load():
    from pathlib import Path

    for p in sorted((Path(__file__).parent.parent / "configs").glob("*.json")):
        load_config(p)
