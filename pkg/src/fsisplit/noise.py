"""Truncated Q-Wiener increments and Hilbert-Schmidt noise coefficients.

The noise space is ``U = span{e_1, ..., e_K}`` with covariance ``Q e_k = q_k e_k``.
An increment is ``dW = sum_k beta_k e_k`` with ``beta_k ~ N(0, q_k dt)``.  In
the orthonormal basis ``f_k = sqrt(q_k) e_k`` of ``U_0 = Q^{1/2} U`` its
coordinates are ``beta_k / sqrt(q_k) ~ N(0, dt)``; noise coefficients are
described by their columns ``G f_k`` and the load is ``sum_k G f_k * beta_k / sqrt(q_k)``.

Increments come from a counter-based generator (Philox) keyed by the path
seed with the step index in the counter, so step ``n`` is addressable
without generating steps ``0..n-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeError
from .fluid import NoiseLoad


@dataclass(frozen=True)
class WienerSpec:
    K: int
    q: tuple
    seed: int = 0

    def __post_init__(self):
        q = tuple(float(x) for x in self.q)
        object.__setattr__(self, "q", q)
        if self.K < 1 or len(q) != self.K:
            raise ConfigurationError(f"need K >= 1 eigenvalues, got K={self.K}, len(q)={len(q)}")
        if not all(x > 0 and math.isfinite(x) for x in q):
            raise ConfigurationError("eigenvalues q_k must be finite and > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    @property
    def trace(self):
        return math.fsum(self.q)

    @classmethod
    def from_profile(cls, K, profile="power", scale=1.0, decay=2.0, seed=0):
        """Eigenvalues ``scale * k^-decay`` (``power``) or ``scale`` (``flat``)."""
        k = np.arange(1, K + 1, dtype=float)
        if profile == "power":
            q = scale * k ** (-decay)
        elif profile == "flat":
            q = np.full(K, float(scale))
        else:
            raise ConfigurationError(f"unknown eigenvalue profile {profile!r}")
        return cls(int(K), tuple(q), int(seed))


@dataclass(frozen=True)
class WienerIncrement:
    n: int
    dt: float
    dW: np.ndarray  # coordinates in the e_k basis, variance q_k dt
    u0_coords: np.ndarray  # coordinates in the U_0 basis, variance dt

    @property
    def u0_norm_sq(self):
        return float(np.sum(self.u0_coords**2))

    @property
    def u_norm_sq(self):
        return float(np.sum(self.dW**2))


def _generator(seed, n):
    from numpy.random import Generator, Philox

    return Generator(Philox(key=int(seed), counter=[0, 0, int(n), 0]))


def sample_increment(spec, n, dt):
    """Increment over step ``n``; a pure function of ``(spec.seed, n, dt)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    xi = _generator(spec.seed, n).standard_normal(spec.K)
    sq = np.sqrt(np.asarray(spec.q))
    u0 = math.sqrt(dt) * xi
    return WienerIncrement(int(n), float(dt), sq * u0, u0)


@dataclass
class WienerPath:
    """Increments of one path, with optional per-step overrides.

    Overrides map a step index to ``dW`` (e-basis coordinates); they are how
    tests construct paths that share a prefix and then diverge.
    """

    spec: WienerSpec
    dt: float
    overrides: dict = field(default_factory=dict)

    def increment(self, n):
        if n in self.overrides:
            dW = np.asarray(self.overrides[n], dtype=float)
            if dW.shape != (self.spec.K,):
                raise ShapeError(f"override at step {n} must have shape ({self.spec.K},)")
            return WienerIncrement(int(n), self.dt, dW.copy(), dW / np.sqrt(np.asarray(self.spec.q)))
        return sample_increment(self.spec, n, self.dt)


@dataclass
class NoiseColumns:
    """Columns ``G f_k`` at quadrature points: fluid (K, nq, 2), structure (K, nsq, 2)."""

    fluid: np.ndarray
    structure: np.ndarray
    model: str

    @property
    def K(self):
        return self.fluid.shape[0]


def hs_norm_sq(cols, disc):
    """Squared Hilbert-Schmidt norm ``sum_k ||col_k||^2`` (quadrature L^2 norms)."""
    f = np.einsum("q,kqc,kqc->", disc.mesh.qw, cols.fluid, cols.fluid)
    s = np.einsum("q,kqc,kqc->", disc.smesh.qw, cols.structure, cols.structure)
    return float(f + s)


def sup_norm(eta, smesh, per_cell=16):
    """Euclidean sup of ``(eta_z, eta_r)`` over a fixed sample set of Gamma."""
    x = np.linspace(0.0, smesh.L, per_cell * smesh.ns + 1)
    n = smesh.ndof
    ez = smesh.evaluate(eta[:n], x)
    er = smesh.evaluate(eta[n:], x)
    return float(np.sqrt(ez**2 + er**2).max())


class NoiseModel:
    """Base class: ``eval(u, v, eta) -> NoiseColumns``."""

    tag = "zero"

    def __init__(self, disc, K):
        self.disc = disc
        self.K = int(K)

    def _check(self, u, v, eta):
        m, s = self.disc.mesh, self.disc.smesh
        if np.shape(u) != (m.n_dofs,) or np.shape(v) != (s.n_dofs,) or np.shape(eta) != (s.n_dofs,):
            raise ShapeError("noise model fields do not match the discretization")

    def eval(self, u, v, eta):
        raise NotImplementedError


class ZeroNoise(NoiseModel):
    tag = "zero"

    def eval(self, u, v, eta):
        self._check(u, v, eta)
        return NoiseColumns(np.zeros((self.K, self.disc.mesh.nq, 2)),
                            np.zeros((self.K, self.disc.smesh.nq, 2)), self.tag)


class DefaultMultiplicativeNoise(NoiseModel):
    """``G f_k = (lam_k m(eta) u xi_k, mu_k v zeta_k)`` with ``m(eta) = sup |eta|``.

    ``xi_k = cos(k pi z / L) cos(pi r / 2)``, ``zeta_k = sin(k pi z / L)`` and
    ``lam_k = mu_k = a sqrt(6) / (pi k)`` so ``sum lam_k^2 < a^2 <= 1``.
    """

    tag = "default_multiplicative"

    def __init__(self, disc, K, amplitude=1.0):
        super().__init__(disc, K)
        if not 0 <= amplitude <= 1:
            raise ConfigurationError("amplitude must lie in [0, 1] for the growth bounds")
        self.amplitude = float(amplitude)
        k = np.arange(1, self.K + 1)
        self.lam = self.amplitude * math.sqrt(6.0) / (math.pi * k)
        self.mu = self.lam.copy()
        m, s = disc.mesh, disc.smesh
        self.xi = np.cos(np.outer(k, m.qz) * math.pi / m.L) * np.cos(0.5 * math.pi * m.qr)[None, :]
        self.zeta = np.sin(np.outer(k, s.qx) * math.pi / s.L)

    def factor(self, eta):
        return sup_norm(eta, self.disc.smesh)

    def eval(self, u, v, eta):
        self._check(u, v, eta)
        U = self.disc.mesh.values(u)
        V = self.disc.smesh.values(v)
        f = self.factor(eta)
        fl = (self.lam * f)[:, None, None] * self.xi[:, :, None] * U[None, :, :]
        st = self.mu[:, None, None] * self.zeta[:, :, None] * V[None, :, :]
        return NoiseColumns(fl, st, self.tag)


class CustomNoise(NoiseModel):
    """Wrap ``fn(U_qp, V_qp, eta, disc) -> (fluid (K,nq,2), structure (K,nsq,2))``."""

    tag = "custom"

    def __init__(self, disc, K, fn):
        super().__init__(disc, K)
        self.fn = fn

    def eval(self, u, v, eta):
        self._check(u, v, eta)
        fl, st = self.fn(self.disc.mesh.values(u), self.disc.smesh.values(v), eta, self.disc)
        fl, st = np.asarray(fl, dtype=float), np.asarray(st, dtype=float)
        if fl.shape != (self.K, self.disc.mesh.nq, 2) or st.shape != (self.K, self.disc.smesh.nq, 2):
            raise ShapeError("custom noise returned columns of the wrong shape")
        return NoiseColumns(fl, st, self.tag)


class OscillatingNoise(DefaultMultiplicativeNoise):
    """Default model with ``m(eta)`` replaced by ``m cos(40 m)``.

    Still satisfies the growth and Lipschitz-in-(u, v) bounds but is not
    Lipschitz in eta with constant ``||u||``; used as a counterexample.
    """

    tag = "custom"

    def factor(self, eta):
        m = sup_norm(eta, self.disc.smesh)
        return m * math.cos(40.0 * m)


def make_noise_model(name, disc, K, amplitude=1.0):
    if name == "zero":
        return ZeroNoise(disc, K)
    if name == "default_multiplicative":
        return DefaultMultiplicativeNoise(disc, K, amplitude)
    if name == "oscillating":
        return OscillatingNoise(disc, K, amplitude)
    raise ConfigurationError(f"unknown noise model {name!r}")


def eval_G(model, u, v, eta):
    return model.eval(u, v, eta)


def noise_load(cols, increment):
    """``G dW = sum_k col_k * (U_0 coordinate k)`` as quadrature-point fields."""
    c = np.asarray(increment.u0_coords if isinstance(increment, WienerIncrement) else increment)
    if c.shape != (cols.K,):
        raise ShapeError(f"increment has {c.shape} modes, columns have {cols.K}")
    return NoiseLoad(np.einsum("k,kqc->qc", c, cols.fluid), np.einsum("k,kqc->qc", c, cols.structure))


def _l2_fluid(disc, U):
    return math.sqrt(float(np.sum(disc.mesh.qw * np.einsum("qc,qc->q", U, U))))


def _l2_struct(disc, V):
    return math.sqrt(float(np.sum(disc.smesh.qw * np.einsum("qc,qc->q", V, V))))


def _col_diff(a, b):
    return NoiseColumns(a.fluid - b.fluid, a.structure - b.structure, a.model)


def random_state(disc, rng, scale=1.0, eta_scale=0.05):
    """Random constrained fluid, structure-velocity and displacement fields."""
    m, s = disc.mesh, disc.smesh
    u = scale * rng.standard_normal(m.n_dofs)
    v = scale * rng.standard_normal(s.n_dofs)
    v[s.mask] = 0.0
    eta = eta_scale * rng.standard_normal(s.n_dofs)
    eta[s.mask] = 0.0
    return u, v, eta


def verify_assumptions(model, sample_count, seed=0):
    """Check the three growth/Lipschitz inequalities on random triples.

    Returns the largest ``lhs - rhs`` per line (positive means violated).  The
    sup norm is the one the shipped models use, so the comparison is exact up
    to rounding.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    disc = model.disc
    rng = np.random.default_rng(seed)
    worst = [-np.inf, -np.inf, -np.inf]
    for _ in range(sample_count):
        u1, v1, e1 = random_state(disc, rng, scale=rng.uniform(0.1, 3.0), eta_scale=rng.uniform(0.005, 0.1))
        u2, v2, e2 = random_state(disc, rng, scale=rng.uniform(0.1, 3.0), eta_scale=rng.uniform(0.005, 0.1))
        nu1 = _l2_fluid(disc, disc.mesh.values(u1))
        nv1 = _l2_struct(disc, disc.smesh.values(v1))
        g1 = model.eval(u1, v1, e1)
        lhs = math.sqrt(hs_norm_sq(g1, disc))
        worst[0] = max(worst[0], lhs - (sup_norm(e1, disc.smesh) * nu1 + nv1))

        g2 = model.eval(u2, v2, e1)
        lhs = math.sqrt(hs_norm_sq(_col_diff(g1, g2), disc))
        rhs = (sup_norm(e1, disc.smesh) * _l2_fluid(disc, disc.mesh.values(u1 - u2))
               + _l2_struct(disc, disc.smesh.values(v1 - v2)))
        worst[1] = max(worst[1], lhs - rhs)

        # nearby displacements probe the local Lipschitz constant in eta
        e3 = e1 + 10.0 ** rng.uniform(-3, 0) * e2
        g3 = model.eval(u1, v1, e3)
        lhs = math.sqrt(hs_norm_sq(_col_diff(g1, g3), disc))
        worst[2] = max(worst[2], lhs - sup_norm(e1 - e3, disc.smesh) * nu1)
    return {"model": model.tag, "samples": sample_count,
            "max_violation": [float(w) for w in worst],
            "holds": [bool(w <= 1e-12) for w in worst]}


def tower_check(model, state, spec, dt, samples=10_000):
    """Monte Carlo of ``E[||G||_HS^2 ||dW||^2]`` with the state frozen.

    Reports the empirical mean with both norms of the increment: the
    ``U_0`` norm (expectation ``dt K``) and the ``U`` norm (expectation
    ``dt Tr Q``), against their predictions.
    """
    u, v, eta = state
    hs = hs_norm_sq(model.eval(u, v, eta), model.disc)
    u0 = np.empty(samples)
    uu = np.empty(samples)
    for i in range(samples):
        inc = sample_increment(spec, i, dt)
        u0[i] = inc.u0_norm_sq
        uu[i] = inc.u_norm_sq
    return {
        "hs_norm_sq": hs,
        "u0_empirical": hs * float(np.mean(u0)), "u0_predicted": hs * dt * spec.K,
        "u0_stderr": hs * float(np.std(u0, ddof=1)) / math.sqrt(samples),
        "trace_empirical": hs * float(np.mean(uu)), "trace_predicted": hs * dt * spec.trace,
        "trace_stderr": hs * float(np.std(uu, ddof=1)) / math.sqrt(samples),
    }


def independence_check(spec, dt, samples=10_000, lag=1):
    """Sample correlation of mode-1 coordinates at steps ``n`` and ``n + lag``."""
    x = np.array([sample_increment(spec, n, dt).u0_coords[0] for n in range(samples + lag)])
    return float(np.corrcoef(x[:-lag], x[lag:])[0, 1])
