"""ALE maps built from a boundary displacement, and the admissibility gauge.

The map from the reference rectangle to the deformed channel is

    A(z, r) = (z, (1 + g(z)) r),   g(z) = eta_r(phi^{-1}(z)),   phi(y) = y + eta_z(y),

so that the top edge r = 1 follows the deformed interface.  Everything in an
:class:`AleFrame` is evaluated at the fluid quadrature points (bulk) or at the
shared boundary quadrature points of Gamma (geometry of the interface).
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass

import numpy as np

from .discretization import Discretization, StructureMesh, mass_matrix, stiffness_matrix
from .errors import InjectivityError, ShapeError


def invert_phi(eta_z, z, L, tol=1e-12, max_iter=100):
    """Solve ``y + eta_z(y) = z`` for y in [0, L].

    ``eta_z`` is a callable ``eta_z(y, deriv=0)`` (e.g. a
    :class:`~fsisplit.discretization.HermiteProfile`) vanishing at both ends
    with ``1 + eta_z' > 0``.  Newton steps are kept inside a shrinking bracket
    and replaced by bisection whenever they leave it.  Works elementwise on
    arrays.
    """
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(z < -tol) or np.any(z > L + tol):
        raise ValueError("z outside [0, L]")
    z = np.clip(z, 0.0, L)
    lo = np.zeros_like(z)
    hi = np.full_like(z, float(L))
    y = z.copy()
    for _ in range(max_iter):
        f = y + eta_z(y) - z
        done = np.abs(f) <= tol
        if np.all(done):
            # one polishing step; Newton is quadratic here so this costs nothing
            d = 1.0 + eta_z(y, 1)
            y = np.clip(y - f / d, lo, hi)
            break
        lo = np.where(f < 0, y, lo)
        hi = np.where(f > 0, y, hi)
        d = 1.0 + eta_z(y, 1)
        if np.any(d <= 0):
            raise InjectivityError("phi' <= 0 encountered while inverting")
        step = y - f / d
        bad = (step <= lo) | (step >= hi)
        y = np.where(done, y, np.where(bad, 0.5 * (lo + hi), step))
    else:
        f = y + eta_z(y) - z
        if np.any(np.abs(f) > max(tol, 4 * np.finfo(float).eps * L)):
            raise InjectivityError(f"phi inversion did not converge (|defect| {np.abs(f).max():.2e})")
    return float(y[0]) if scalar else y


@dataclass(frozen=True, eq=False)
class AleFrame:
    """Geometry of one ALE map, tabulated at quadrature points."""

    disc: Discretization
    eta: np.ndarray
    g: np.ndarray  # (nq,) vertical stretch at bulk points
    dg: np.ndarray  # (nq,) dg/dz
    J: np.ndarray  # (nq,)
    gradA: np.ndarray  # (nq, 2, 2)
    gradA_inv: np.ndarray  # (nq, 2, 2)
    A: np.ndarray  # (nq, 2) image of the quadrature points
    phi_inv_table: np.ndarray  # phi^{-1} at the structure nodes
    S: np.ndarray  # (nb,) arc-length factor on Gamma
    tau: np.ndarray  # (nb, 2) unit tangent
    n: np.ndarray  # (nb, 2) unit normal
    margin: float  # inf (1 + d eta_z / dz)
    inf_J: float  # inf over the closed domain of J
    gradA_max: float  # max Frobenius norm of gradA

    @property
    def mesh(self):
        return self.disc.mesh

    @property
    def smesh(self):
        return self.disc.smesh

    def phi(self, y):
        return np.asarray(y) + self.smesh.evaluate(self.eta[: self.smesh.ndof], y)


def build_frame(eta, disc, tol=1e-12):
    """Tabulate the ALE map of ``eta`` on the meshes of ``disc``.

    Raises :class:`InjectivityError` if ``z + eta_z(z)`` is not strictly
    increasing, or if the stretched domain collapses (``inf J <= 0``).
    """
    mesh, smesh, gq = disc.mesh, disc.smesh, disc.gamma
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (smesh.n_dofs,):
        raise ShapeError(f"eta: expected ({smesh.n_dofs},), got {eta.shape}")
    pz, pr = smesh.profile(eta, "z"), smesh.profile(eta, "r")
    margin = 1.0 + pz.min_value(1)
    if not margin > 0:
        raise InjectivityError(f"boundary map not injective (margin {margin:.3e})")
    inf_J = 1.0 + pr.min_value(0)
    if not inf_J > 0:
        raise InjectivityError(f"fluid domain collapses (inf J {inf_J:.3e})")

    # phi^{-1} at each distinct bulk abscissa; the grid repeats them across rows
    zu, inv = np.unique(mesh.qz, return_inverse=True)
    yu = invert_phi(pz, zu, mesh.L, tol)
    y = yu[inv]
    g = pr(y)
    dg = pr(y, 1) / (1.0 + pz(y, 1))
    r = mesh.qr
    nq = mesh.nq
    gradA = np.zeros((nq, 2, 2))
    gradA[:, 0, 0] = 1.0
    gradA[:, 1, 0] = dg * r
    gradA[:, 1, 1] = 1.0 + g
    J = 1.0 + g
    gradA_inv = np.zeros_like(gradA)
    gradA_inv[:, 0, 0] = 1.0
    gradA_inv[:, 1, 0] = -dg * r / J
    gradA_inv[:, 1, 1] = 1.0 / J
    A = np.column_stack([mesh.qz, J * r])

    tz = 1.0 + pz(gq.z, 1)
    tr = pr(gq.z, 1)
    S = np.hypot(tz, tr)
    tau = np.column_stack([tz, tr]) / S[:, None]
    nrm = np.column_stack([-tau[:, 1], tau[:, 0]])

    phi_inv_table = invert_phi(pz, smesh.nodes, mesh.L, tol)
    gmax = float(np.sqrt(np.einsum("qij,qij->q", gradA, gradA)).max())
    return AleFrame(disc, eta.copy(), g, dg, J, gradA, gradA_inv, A, phi_inv_table,
                    S, tau, nrm, float(margin), float(inf_J), gmax)


def transformed_gradient(frame, u):
    """``grad^eta u = grad u . (grad A)^{-1}`` at bulk points, shape (nq, 2, 2)."""
    return np.einsum("qcm,qmk->qck", frame.mesh.gradients(u), frame.gradA_inv)


def transformed_divergence(frame, u):
    G = transformed_gradient(frame, u)
    return G[:, 0, 0] + G[:, 1, 1]


def sym_gradient(frame, u):
    G = transformed_gradient(frame, u)
    return 0.5 * (G + np.swapaxes(G, 1, 2))


def ale_velocity(frame_n, frame_np1, dt):
    """Domain velocity ``(A_{n+1} - A_n) / dt`` at bulk points, shape (nq, 2)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if frame_n.mesh is not frame_np1.mesh:
        raise ShapeError("frames live on different meshes")
    return (frame_np1.A - frame_n.A) / dt


@functools.lru_cache(maxsize=16)
def _norm_matrices(smesh: StructureMesh):
    M = mass_matrix(smesh)
    return M, M + stiffness_matrix(smesh, 1) + stiffness_matrix(smesh, 2)


def structure_norms(eta, smesh):
    """``(||eta||_L2, ||eta||_H2)`` of a two-component structure field."""
    M, H = _norm_matrices(smesh)
    n = smesh.ndof
    ez, er = eta[:n], eta[n:]
    l2 = ez @ (M @ ez) + er @ (M @ er)
    h2 = ez @ (H @ ez) + er @ (H @ er)
    return float(np.sqrt(max(l2, 0.0))), float(np.sqrt(max(h2, 0.0)))


def interpolated_norm(l2, h2, s):
    """Interpolation gauge ``l2^(1 - s/2) * h2^(s/2)`` standing in for the H^s norm."""
    if not 0 <= s <= 2:
        raise ValueError("s must lie in [0, 2]")
    return float(l2 ** (1 - s / 2) * h2 ** (s / 2))


@dataclass(frozen=True)
class AdmissibilityReport:
    inf_J: float
    sobolev_s_norm: float
    margin: float
    jacobian_ok: bool
    norm_ok: bool
    injective_ok: bool

    @property
    def admissible(self):
        return self.jacobian_ok and self.norm_ok and self.injective_ok


def admissibility(eta, smesh, delta1, delta2, s=1.75, gamma_inj=0.1):
    """Evaluate the three admissibility quantities of ``eta`` and their flags.

    Never raises on degenerate input: a collapsed or folded configuration just
    fails the corresponding flag.
    """
    if not 1.5 < s < 2:
        raise ValueError("s must satisfy 3/2 < s < 2")
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (smesh.n_dofs,):
        raise ShapeError(f"eta: expected ({smesh.n_dofs},), got {eta.shape}")
    inf_J = 1.0 + smesh.profile(eta, "r").min_value(0)
    margin = 1.0 + smesh.profile(eta, "z").min_value(1)
    nrm = interpolated_norm(*structure_norms(eta, smesh), s)
    return AdmissibilityReport(
        inf_J=float(inf_J), sobolev_s_norm=nrm, margin=float(margin),
        jacobian_ok=bool(inf_J > delta1), norm_ok=bool(nrm < 1.0 / delta2),
        injective_ok=bool(margin > gamma_inj))


def frame_to_csv(frame, path):
    """Dump the bulk quadrature table of a frame (one row per point)."""
    m = frame.mesh
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "r", "weight", "J", "A00", "A01", "A10", "A11",
                    "Ainv00", "Ainv01", "Ainv10", "Ainv11"])
        for q in range(m.nq):
            w.writerow([repr(float(x)) for x in (
                m.qz[q], m.qr[q], m.qw[q], frame.J[q], *frame.gradA[q].ravel(),
                *frame.gradA_inv[q].ravel())])
