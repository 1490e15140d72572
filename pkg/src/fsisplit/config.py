"""Run configuration: dataclasses, JSON schema and pressure signals."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import jsonschema
import numpy as np
from scipy import integrate

from .errors import ConfigurationError

CONFIG_VERSION = 1


@dataclass(frozen=True)
class PressureSignal:
    """Time signal ``P(t)``: ``zero``, ``constant``, ``sine`` or ``step``.

    ``sine`` is ``offset + amplitude * sin(2 pi t / period + phase)``; ``step``
    jumps from ``offset`` to ``offset + amplitude`` at ``t_step``.
    """

    kind: str = "zero"
    amplitude: float = 0.0
    offset: float = 0.0
    period: float = 1.0
    phase: float = 0.0
    t_step: float = 0.5

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "constant":
            return np.full_like(t, self.offset + self.amplitude)
        if self.kind == "sine":
            return self.offset + self.amplitude * np.sin(2 * math.pi * t / self.period + self.phase)
        if self.kind == "step":
            return np.where(t < self.t_step, self.offset, self.offset + self.amplitude)
        raise ConfigurationError(f"unknown pressure signal {self.kind!r}")

    def average(self, t0, t1):
        """Exact-to-quadrature-tolerance mean of the signal over ``[t0, t1]``."""
        if self.kind == "zero":
            return 0.0
        pts = [self.t_step] if self.kind == "step" and t0 < self.t_step < t1 else None
        val, _ = integrate.quad(lambda s: float(self(s)), t0, t1, points=pts,
                                epsabs=1e-14, epsrel=1e-13, limit=200)
        return val / (t1 - t0)


@dataclass(frozen=True)
class NoiseConfig:
    model: str = "default_multiplicative"  # zero | default_multiplicative | oscillating
    K: int = 8
    profile: str = "power"  # power | flat
    scale: float = 1.0
    decay: float = 2.0
    amplitude: float = 1.0


@dataclass(frozen=True)
class InitialData:
    """``eta_0 = (az, ar) * 16 z^2 (L - z)^2 / L^4``; fluid at rest unless ``u0_shear``.

    ``u0_shear`` sets ``u_0 = (c r (2 - r), 0)``, a smooth field meeting the
    essential conditions.
    """

    eta_r_amplitude: float = 0.05
    eta_z_amplitude: float = 0.0
    v_r_amplitude: float = 0.0
    u0_shear: float = 0.0


@dataclass(frozen=True)
class SchemeConfig:
    L: float = 1.0
    nz: int = 16
    nr: int = 8
    ns: int = 16
    T: float = 1.0
    N: int = 32
    nu: float = 0.1
    kappa_div: float | None = None  # None -> N
    kappa_bnd: float | None = None  # None -> kappa_div
    delta1: float = 0.25
    delta2: float | None = None  # None -> 1 / max(2 * gauge(eta_0), 1)
    s: float = 1.75
    gamma_inj: float = 0.1
    c0: float = 0.0
    c1: float = 0.0
    c2: float = 1.0
    allow_degenerate_elastic: bool = False
    p_in: PressureSignal = field(default_factory=lambda: PressureSignal("sine", 1.0, 0.0, 1.0))
    p_out: PressureSignal = field(default_factory=PressureSignal)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    initial: InitialData = field(default_factory=InitialData)
    gamma_constraint: str = "penalty_both"
    advection: str = "lagged"
    solver: str = "auto"

    def __post_init__(self):
        if not (self.L > 0 and self.T > 0):
            raise ConfigurationError("L and T must be positive")
        if self.N < 1 or self.nz < 1 or self.nr < 1 or self.ns < 2:
            raise ConfigurationError("need N, nz, nr >= 1 and ns >= 2")
        if not self.nu > 0:
            raise ConfigurationError("nu must be positive")
        if not 0 < self.delta1:
            raise ConfigurationError("delta1 must be positive")
        if self.delta2 is not None and not self.delta2 > 0:
            raise ConfigurationError("delta2 must be positive")
        if not 1.5 < self.s < 2:
            raise ConfigurationError("s must satisfy 3/2 < s < 2")
        if not 0 <= self.gamma_inj < 1:
            raise ConfigurationError("gamma_inj must lie in [0, 1)")
        for k in ("kappa_div", "kappa_bnd"):
            v = getattr(self, k)
            if v is not None and not v >= 0:
                raise ConfigurationError(f"{k} must be >= 0")
        if self.kappa_div is not None and self.kappa_div == 0:
            raise ConfigurationError("kappa_div must be positive")

    @property
    def dt(self):
        return self.T / self.N

    @property
    def kappa_div_value(self):
        return float(self.N if self.kappa_div is None else self.kappa_div)

    @property
    def kappa_bnd_value(self):
        return float(self.kappa_div_value if self.kappa_bnd is None else self.kappa_bnd)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["version"] = CONFIG_VERSION
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def digest(self):
        """SHA-256 of the canonical JSON form."""
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, d):
        validate_config(d)
        d = dict(d)
        d.pop("version", None)
        sub = {"p_in": PressureSignal, "p_out": PressureSignal, "noise": NoiseConfig,
               "initial": InitialData}
        for k, typ in sub.items():
            if k in d:
                d[k] = typ(**d[k])
        return cls(**d)


def _num(minimum=None, exclusive=None, maximum=None, nullable=False):
    s = {"type": ["number", "null"] if nullable else "number"}
    if minimum is not None:
        s["minimum"] = minimum
    if exclusive is not None:
        s["exclusiveMinimum"] = exclusive
    if maximum is not None:
        s["maximum"] = maximum
    return s


_PRESSURE = {
    "type": "object", "additionalProperties": False,
    "properties": {"kind": {"enum": ["zero", "constant", "sine", "step"]},
                   "amplitude": _num(), "offset": _num(), "period": _num(exclusive=0),
                   "phase": _num(), "t_step": _num()},
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fsisplit run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "L": _num(exclusive=0), "T": _num(exclusive=0),
        "nz": {"type": "integer", "minimum": 1, "maximum": 256},
        "nr": {"type": "integer", "minimum": 1, "maximum": 256},
        "ns": {"type": "integer", "minimum": 2, "maximum": 1024},
        "N": {"type": "integer", "minimum": 1, "maximum": 100000},
        "nu": _num(exclusive=0),
        "kappa_div": _num(exclusive=0, nullable=True),
        "kappa_bnd": _num(minimum=0, nullable=True),
        "delta1": _num(exclusive=0),
        "delta2": _num(exclusive=0, nullable=True),
        "s": {"type": "number", "exclusiveMinimum": 1.5, "exclusiveMaximum": 2},
        "gamma_inj": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "c0": _num(minimum=0), "c1": _num(minimum=0), "c2": _num(minimum=0),
        "allow_degenerate_elastic": {"type": "boolean"},
        "p_in": _PRESSURE, "p_out": _PRESSURE,
        "noise": {
            "type": "object", "additionalProperties": False,
            "properties": {"model": {"enum": ["zero", "default_multiplicative", "oscillating"]},
                           "K": {"type": "integer", "minimum": 1, "maximum": 512},
                           "profile": {"enum": ["power", "flat"]},
                           "scale": _num(exclusive=0), "decay": _num(minimum=0),
                           "amplitude": _num(minimum=0, maximum=1)},
        },
        "initial": {
            "type": "object", "additionalProperties": False,
            "properties": {"eta_r_amplitude": _num(), "eta_z_amplitude": _num(),
                           "v_r_amplitude": _num(), "u0_shear": _num()},
        },
        "gamma_constraint": {"enum": ["penalty_both", "zero_z_penalty_r"]},
        "advection": {"enum": ["lagged", "picard"]},
        "solver": {"enum": ["auto", "direct", "gmres"]},
    },
}

ENSEMBLE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "scheme": CONFIG_SCHEMA,
        "paths": {"type": "integer", "minimum": 1},
        "master_seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
    },
    "required": ["scheme"],
}


def validate_config(d):
    try:
        jsonschema.validate(d, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"invalid config at {where}: {exc.message}") from None


def load_config(path):
    """Read a JSON file holding either a bare scheme config or ``{"scheme": ..., ...}``.

    Returns ``(SchemeConfig, extras)`` where extras carries ensemble keys.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from None
    if isinstance(raw, dict) and "scheme" in raw:
        try:
            jsonschema.validate(raw, ENSEMBLE_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigurationError(f"invalid config at {where}: {exc.message}") from None
        extras = {k: v for k, v in raw.items() if k != "scheme"}
        return SchemeConfig.from_dict(raw["scheme"]), extras
    return SchemeConfig.from_dict(raw), {}
