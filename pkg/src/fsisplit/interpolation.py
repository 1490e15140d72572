"""Time interpolants of a trajectory and exact time-shift integrals.

With ``t^n = n dt``:

* piecewise constant on ``[t^n, t^{n+1})``: ``u_N, v_N, eta_N, eta*_N`` take
  the step-n value, ``v#_N`` takes ``v^{n+1/2}`` and ``v*_N`` takes
  ``theta(eta^{n+1}) v^{n+1/2}``;
* shifted, on ``(t^n, t^{n+1}]``: ``u+_N, eta+_N`` take the step-(n+1) value;
* piecewise linear between grid values: ``u~, v~, eta~, eta*~``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .ale import _norm_matrices
from .discretization import gauss_legendre, mass_matrix

CONSTANT = ("u", "v", "eta", "eta_star", "v_sharp", "v_star")
SHIFTED = ("u_plus", "eta_plus")
LINEAR = ("u_tilde", "v_tilde", "eta_tilde", "eta_star_tilde")
VIEWS = CONSTANT + SHIFTED + LINEAR


@dataclass(frozen=True)
class View:
    """One interpolant: a kind, the nodal values it is built from, and its space."""

    kind: str  # left | right | linear
    values: np.ndarray  # left/linear: (N+1, n); right: (N+1, n) with row 0 unused
    dt: float
    space: str  # fluid | structure

    @property
    def N(self):
        return self.values.shape[0] - 1

    @property
    def T(self):
        return self.N * self.dt

    def __call__(self, t):
        t = float(t)
        if not -1e-12 * self.T <= t <= self.T * (1 + 1e-12):
            raise ValueError(f"t={t} outside [0, {self.T}]")
        x = t / self.dt
        if self.kind == "left":
            n = min(int(np.floor(x + 1e-12)), self.N - 1)
            return self.values[n]
        if self.kind == "right":
            n = max(int(np.ceil(x - 1e-12)), 1)
            return self.values[n]
        k = round(x)
        if abs(x - k) <= 1e-12 * max(1.0, abs(x)):
            # grid times are returned exactly, not as a rounded blend
            return self.values[k]
        n = min(int(np.floor(x)), self.N - 1)
        a = x - n
        return (1 - a) * self.values[n] + a * self.values[n + 1]


def _pad_interval(vals):
    """Interval values (N, n) as a left-constant table (N+1, n)."""
    return np.vstack([vals, vals[-1:]])


def interpolants(traj):
    """All interpolant views of a trajectory, keyed by name."""
    dt = traj.dt
    return {
        "u": View("left", traj.u, dt, "fluid"),
        "v": View("left", traj.v, dt, "structure"),
        "eta": View("left", traj.eta, dt, "structure"),
        "eta_star": View("left", traj.eta_star, dt, "structure"),
        "v_sharp": View("left", _pad_interval(traj.v_half), dt, "structure"),
        "v_star": View("left", _pad_interval(traj.v_star), dt, "structure"),
        "u_plus": View("right", traj.u, dt, "fluid"),
        "eta_plus": View("right", traj.eta, dt, "structure"),
        "u_tilde": View("linear", traj.u, dt, "fluid"),
        "v_tilde": View("linear", traj.v, dt, "structure"),
        "eta_tilde": View("linear", traj.eta, dt, "structure"),
        "eta_star_tilde": View("linear", traj.eta_star, dt, "structure"),
    }


@functools.lru_cache(maxsize=16)
def _fluid_gram(mesh):
    return mass_matrix(mesh, components=2)


def gram(disc, space, norm="L2"):
    """Gram matrix of the squared norm used for time integrals."""
    if space == "fluid":
        if norm != "L2":
            raise ValueError("fluid fields only carry the L2 norm here")
        return _fluid_gram(disc.mesh)
    import scipy.sparse as sp

    M, H = _norm_matrices(disc.smesh)
    return sp.block_diag([M if norm == "L2" else H] * 2, format="csr")


def _sqnorm(G, x):
    return float(x @ (G @ x))


def time_shift_norm(traj, selector, h, norm="L2", disc=None):
    """``int_h^T || f(t) - f(t - h) ||^2 dt`` evaluated exactly.

    The integrand is piecewise constant (or piecewise quadratic for linear
    views) between the breakpoints ``{t^n} U {t^n + h}``; each piece is
    integrated with 3-point Gauss.
    """
    from .scheme import prepare

    views = interpolants(traj)
    f = views[selector]
    T = f.T
    if not 0 < h < T:
        raise ValueError("need 0 < h < T")
    disc = disc or prepare(traj.config).disc
    G = gram(disc, f.space, norm)
    grid = np.arange(f.N + 1) * f.dt
    brk = np.union1d(grid[grid >= h], grid[grid + h <= T] + h)
    brk = np.union1d(brk, [h, T])
    brk = brk[(brk >= h) & (brk <= T)]
    keep = np.concatenate([[True], np.diff(brk) > 1e-12 * T])
    brk = brk[keep]
    gx, gw = gauss_legendre(3)
    total = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        ln = b - a
        for x, wt in zip(gx, gw):
            t = a + ln * x
            total += wt * ln * _sqnorm(G, f(t) - f(t - h))
    return total


def interval_difference(traj, a="u", b="u_tilde", norm="L2", disc=None):
    """``int_0^T ||a(t) - b(t)||^2 dt`` by exact piecewise Gauss quadrature."""
    from .scheme import prepare

    views = interpolants(traj)
    fa, fb = views[a], views[b]
    disc = disc or prepare(traj.config).disc
    G = gram(disc, fa.space, norm)
    gx, gw = gauss_legendre(3)
    total = 0.0
    for n in range(fa.N):
        t0 = n * fa.dt
        for x, wt in zip(gx, gw):
            t = t0 + fa.dt * x
            total += wt * fa.dt * _sqnorm(G, fa(t) - fb(t))
    return total
