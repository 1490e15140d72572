"""Slow, loop-based reference implementations used to cross-check assembly.

Nothing here shares code with the vectorized assemblers beyond the mesh
numbering convention: basis functions, Hermite polynomials, the boundary
inversion (``scipy.optimize.brentq``) and the quadrature loops are written out
again.  Quadrature rules are the same (2x2 Gauss in bulk cells, 4-point Gauss
on the Gamma sub-intervals, 4-point Gauss per structure cell) because the
integrands involve ``phi^{-1}`` and ``sqrt`` and are not polynomial.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq


def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def hermite_eval(coeffs, L, ns, x, deriv=0):
    """Scalar Hermite profile by explicit formulas (one point)."""
    h = L / ns
    k = min(int(x // h), ns - 1)
    t = (x - k * h) / h
    v0, s0, v1, s1 = coeffs[2 * k], coeffs[2 * k + 1], coeffs[2 * k + 2], coeffs[2 * k + 3]
    if deriv == 0:
        return (v0 * (2 * t**3 - 3 * t**2 + 1) + s0 * h * (t**3 - 2 * t**2 + t)
                + v1 * (-2 * t**3 + 3 * t**2) + s1 * h * (t**3 - t**2))
    if deriv == 1:
        return (v0 * (6 * t**2 - 6 * t) / h + s0 * (3 * t**2 - 4 * t + 1)
                + v1 * (-6 * t**2 + 6 * t) / h + s1 * (3 * t**2 - 2 * t))
    raise ValueError("deriv 0 or 1 only")


def _hermite_shape(t, h):
    return [2 * t**3 - 3 * t**2 + 1, h * (t**3 - 2 * t**2 + t), -2 * t**3 + 3 * t**2, h * (t**3 - t**2)]


def _geometry(eta, L, ns, z, r):
    """Map data at one point: J, gradA^{-1}, g for the vertical-stretch ALE map."""
    nd = 2 * (ns + 1)
    ez, er = eta[:nd], eta[nd:]
    f = lambda y: y + hermite_eval(ez, L, ns, y) - z  # noqa: E731
    if z <= 0:
        y = 0.0
    elif z >= L:
        y = L
    else:
        y = brentq(f, 0.0, L, xtol=1e-15, rtol=1e-15, maxiter=500)
    g = hermite_eval(er, L, ns, y)
    dg = hermite_eval(er, L, ns, y, 1) / (1 + hermite_eval(ez, L, ns, y, 1))
    gradA = np.array([[1.0, 0.0], [dg * r, 1.0 + g]])
    return 1.0 + g, np.linalg.inv(gradA), g


def dense_fluid_matrix(L, nz, nr, ns, eta_n, eta_np1, u_n, nu, kappa_div, kappa_bnd, dt,
                       gamma_constraint="penalty_both"):
    """Dense matrix of the coupled system (no essential conditions applied).

    The advecting field is ``u^n - w`` with ``w = (0, (g_{n+1} - g_n) r / dt)``.
    """
    nn = (nz + 1) * (nr + 1)
    nd = 2 * (ns + 1)
    ntot = 2 * nn + 2 * nd
    A = np.zeros((ntot, ntot))
    hz, hr = L / nz, 1.0 / nr
    gx, gw = _gauss(2)

    for j in range(nr):
        for i in range(nz):
            nodes = [i + j * (nz + 1), i + 1 + j * (nz + 1), i + 1 + (j + 1) * (nz + 1), i + (j + 1) * (nz + 1)]
            for a_ in range(2):
                for b_ in range(2):
                    sx, sy = gx[b_], gx[a_]
                    wq = gw[a_] * gw[b_] * hz * hr
                    z, r = i * hz + sx * hz, j * hr + sy * hr
                    phi = [(1 - sx) * (1 - sy), sx * (1 - sy), sx * sy, (1 - sx) * sy]
                    dphi = [np.array([-(1 - sy) / hz, -(1 - sx) / hr]),
                            np.array([(1 - sy) / hz, -sx / hr]),
                            np.array([sy / hz, sx / hr]),
                            np.array([-sy / hz, (1 - sx) / hr])]
                    J0, Ainv, g0 = _geometry(eta_n, L, ns, z, r)
                    J1, _, g1 = _geometry(eta_np1, L, ns, z, r)
                    w_vec = np.array([0.0, (g1 - g0) * r / dt])
                    un = np.array([sum(phi[k] * u_n[c * nn + nodes[k]] for k in range(4)) for c in range(2)])
                    beta = un - w_vec
                    G = [dphi[k] @ Ainv for k in range(4)]
                    for ka in range(4):
                        for kb in range(4):
                            for c in range(2):
                                for d in range(2):
                                    row, col = c * nn + nodes[ka], d * nn + nodes[kb]
                                    val = 0.0
                                    if c == d:
                                        val += 0.5 * (J0 + J1) * phi[ka] * phi[kb]
                                        val += 0.5 * dt * J0 * (phi[ka] * (beta @ G[kb]) - phi[kb] * (beta @ G[ka]))
                                    # D(phi_b e_d) : D(phi_a e_c) written out from the definitions
                                    Da = np.zeros((2, 2))
                                    Da[c, :] += 0.5 * G[ka]
                                    Da[:, c] += 0.5 * G[ka]
                                    Db = np.zeros((2, 2))
                                    Db[d, :] += 0.5 * G[kb]
                                    Db[:, d] += 0.5 * G[kb]
                                    val += 2 * nu * dt * J0 * np.sum(Da * Db)
                                    val += kappa_div * dt * G[ka][c] * G[kb][d]
                                    A[row, col] += wq * val

    # structure mass
    sx4, sw4 = _gauss(4)
    h = L / ns
    for k in range(ns):
        for t, wt in zip(sx4, sw4):
            sh = _hermite_shape(t, h)
            for a_ in range(4):
                for b_ in range(4):
                    for c in range(2):
                        A[2 * nn + c * nd + 2 * k + a_, 2 * nn + c * nd + 2 * k + b_] += wt * h * sh[a_] * sh[b_]

    # boundary penalty on the union of both grids
    if kappa_bnd > 0:
        brk = sorted(set(np.round(np.linspace(0, L, nz + 1), 14)) | set(np.round(np.linspace(0, L, ns + 1), 14)))
        nd_ = 2 * (ns + 1)
        comps = (1,) if gamma_constraint == "zero_z_penalty_r" else (0, 1)
        for a, b in zip(brk[:-1], brk[1:]):
            for t, wt in zip(sx4, sw4):
                z = a + (b - a) * t
                wz = wt * (b - a)
                tz = 1 + hermite_eval(eta_n[:nd_], L, ns, z, 1)
                tr = hermite_eval(eta_n[nd_:], L, ns, z, 1)
                S = np.hypot(tz, tr)
                i = min(int(z // hz), nz - 1)
                s = (z - i * hz) / hz
                k = min(int(z // h), ns - 1)
                ts = (z - k * h) / h
                trace = {i + nr * (nz + 1): 1 - s, i + 1 + nr * (nz + 1): s}
                sh = _hermite_shape(ts, h)
                for c in comps:
                    entries = {c * nn + node: val for node, val in trace.items()}
                    for a_ in range(4):
                        key = 2 * nn + c * nd + 2 * k + a_
                        entries[key] = entries.get(key, 0.0) - sh[a_]
                    for p, vp in entries.items():
                        for q, vq in entries.items():
                            A[p, q] += kappa_bnd * dt * wz * S * vp * vq
    return A
