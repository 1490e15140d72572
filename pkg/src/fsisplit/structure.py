"""Elastic operator of the clamped structure and the implicit structure sub-step."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import StructureMesh, mass_matrix, stiffness_matrix
from .errors import ConfigurationError, ConfigurationWarning, ShapeError, SolverError


@dataclass(eq=False)
class ElasticOperator:
    """``L_e = c0 I - c1 d_zz + c2 d_zzzz`` acting on each component.

    ``K`` and ``M`` are the two-component stiffness and mass matrices on the
    full dof layout; solves restrict to ``smesh.free``.
    """

    smesh: StructureMesh
    c0: float
    c1: float
    c2: float
    K: sp.csr_matrix
    M: sp.csr_matrix
    _lu: dict = field(default_factory=dict, repr=False)

    def apply(self, eta):
        return self.K @ eta

    def energy(self, eta):
        """Elastic energy product ``<L_e eta, eta>``."""
        eta = np.asarray(eta, dtype=float)
        return float(eta @ (self.K @ eta))

    def inner(self, a, b):
        return float(np.asarray(a) @ (self.K @ np.asarray(b)))

    def l2_sq(self, v):
        v = np.asarray(v, dtype=float)
        return float(v @ (self.M @ v))

    def step_factor(self, dt):
        """Cached LU of ``M + dt^2 K`` on the free dofs."""
        key = float(dt)
        lu = self._lu.get(key)
        if lu is None:
            f = self.smesh.free
            A = (self.M + key**2 * self.K)[f][:, f].tocsc()
            try:
                lu = spla.splu(A)
            except RuntimeError as exc:
                raise SolverError(f"structure system singular: {exc}") from exc
            self._lu[key] = lu
        return lu


def assemble_Le(smesh, c0=0.0, c1=0.0, c2=1.0, *, test_mode=False):
    """Assemble the elastic operator with non-negative coefficients."""
    c0, c1, c2 = float(c0), float(c1), float(c2)
    if min(c0, c1, c2) < 0:
        raise ConfigurationError(f"elastic coefficients must be >= 0, got {(c0, c1, c2)}")
    if c0 == c1 == c2 == 0 and not test_mode:
        warnings.warn("all elastic coefficients vanish; L_e is not coercive",
                      ConfigurationWarning, stacklevel=2)
    M1 = mass_matrix(smesh)
    K1 = c0 * M1 + c1 * stiffness_matrix(smesh, 1) + c2 * stiffness_matrix(smesh, 2)
    K1 = 0.5 * (K1 + K1.T)
    K = sp.block_diag([K1, K1], format="csr")
    M = sp.block_diag([M1, M1], format="csr")
    return ElasticOperator(smesh, c0, c1, c2, K, M)


@dataclass
class StructureStepResult:
    eta_half: np.ndarray
    v_half: np.ndarray
    audit_residual: float
    energy_before: float  # ||v^n||^2 + e(eta^n)
    energy_after: float  # ||v_half||^2 + e(eta_half)
    dissipation: float  # ||v_half - v^n||^2 + e(eta_half - eta^n)


def structure_step(eta_n, v_n, Le, dt):
    """One implicit elastodynamics step with the fluid switched off.

    Solves ``(M + dt^2 K) v = M v^n - dt K eta^n`` on the free dofs, then sets
    ``eta_half = eta_n + dt * v_half``.  The audit is the defect of

        |v_half|^2 + |v_half - v^n|^2 + e(eta_half) + e(eta_half - eta^n)
            = |v^n|^2 + e(eta^n).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    sm = Le.smesh
    eta_n = np.asarray(eta_n, dtype=float)
    v_n = np.asarray(v_n, dtype=float)
    for name, x in (("eta_n", eta_n), ("v_n", v_n)):
        if x.shape != (sm.n_dofs,):
            raise ShapeError(f"{name}: expected ({sm.n_dofs},), got {x.shape}")
    f = sm.free
    rhs = (Le.M @ v_n - dt * (Le.K @ eta_n))[f]
    v_half = np.zeros(sm.n_dofs)
    v_half[f] = Le.step_factor(dt).solve(rhs)
    eta_half = eta_n + dt * v_half

    before = Le.l2_sq(v_n) + Le.energy(eta_n)
    after = Le.l2_sq(v_half) + Le.energy(eta_half)
    diss = Le.l2_sq(v_half - v_n) + Le.energy(eta_half - eta_n)
    return StructureStepResult(eta_half, v_half, float(abs(after + diss - before)),
                               before, after, diss)
