"""Reference meshes, finite element bases and quadrature.

The fluid lives on the reference rectangle ``O = (0, L) x (0, 1)`` discretized
by continuous bilinear (Q1) elements on a structured grid.  The structure lives
on ``Gamma = (0, L)`` with C1 cubic Hermite elements (value and slope per node),
clamped at both ends.

Layouts
-------
Fluid node ``(i, j)`` (``i`` along z, ``j`` along r) has index
``a = i + j * (nz + 1)``.  A fluid field is a flat vector ``[u_z, u_r]`` with
``2 * n_nodes`` entries.  A structure field is ``[eta_z, eta_r]`` with
``2 * ndof`` entries, ``ndof = 2 * (ns + 1)``, node ``k`` owning dofs
``2k`` (value) and ``2k + 1`` (slope) inside each component block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DegenerateFrameError, ShapeError

TAGS = ("interior", "gamma_top", "inlet", "outlet", "bottom")
INTERIOR, GAMMA_TOP, INLET, OUTLET, BOTTOM = range(5)


def gauss_legendre(n):
    """Gauss-Legendre points and weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True, eq=False)
class RefMesh:
    L: float
    nz: int
    nr: int
    nodes: np.ndarray  # (n_nodes, 2) coordinates (z, r)
    cells: np.ndarray  # (n_cells, 4) counter-clockwise node indices
    node_tags: np.ndarray  # (n_nodes,) tag code, corner priority applied
    edges: np.ndarray  # (n_edges, 2) boundary edge node pairs
    edge_tags: np.ndarray  # (n_edges,) tag code
    qz: np.ndarray  # quadrature abscissae
    qr: np.ndarray
    qw: np.ndarray
    qcell: np.ndarray
    qnodes: np.ndarray  # (nq, 4) global nodes of the cell owning each point
    qphi: np.ndarray  # (nq, 4) basis values
    qdphi: np.ndarray  # (nq, 4, 2) basis gradients (d/dz, d/dr)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_dofs(self):
        return 2 * self.n_nodes

    @property
    def nq(self):
        return self.qw.size

    @property
    def hz(self):
        return self.L / self.nz

    @property
    def hr(self):
        return 1.0 / self.nr

    def node_index(self, i, j):
        return i + j * (self.nz + 1)

    def side_nodes(self, tag):
        """Nodes on the closed boundary segment ``tag`` (corners included)."""
        i = np.arange(self.nz + 1)
        j = np.arange(self.nr + 1)
        if tag == GAMMA_TOP:
            return self.node_index(i, self.nr)
        if tag == BOTTOM:
            return self.node_index(i, 0)
        if tag == INLET:
            return self.node_index(0, j)
        if tag == OUTLET:
            return self.node_index(self.nz, j)
        raise ValueError(f"not a boundary tag: {tag}")

    def values(self, u):
        """Vector field at quadrature points, shape (nq, 2)."""
        u = _check_len(u, self.n_dofs, "fluid field")
        uz, ur = u[: self.n_nodes], u[self.n_nodes:]
        return np.stack(
            [np.einsum("qa,qa->q", self.qphi, uz[self.qnodes]),
             np.einsum("qa,qa->q", self.qphi, ur[self.qnodes])], axis=1)

    def gradients(self, u):
        """Reference gradient at quadrature points, shape (nq, 2, 2).

        Row index is the velocity component, column the derivative direction.
        """
        u = _check_len(u, self.n_dofs, "fluid field")
        uz, ur = u[: self.n_nodes], u[self.n_nodes:]
        return np.stack(
            [np.einsum("qak,qa->qk", self.qdphi, uz[self.qnodes]),
             np.einsum("qak,qa->qk", self.qdphi, ur[self.qnodes])], axis=1)

    def interpolate(self, fn):
        """Nodal interpolant of ``fn(z, r) -> (f_z, f_r)``."""
        fz, fr = fn(self.nodes[:, 0], self.nodes[:, 1])
        out = np.empty(self.n_dofs)
        out[: self.n_nodes] = np.broadcast_to(fz, (self.n_nodes,))
        out[self.n_nodes:] = np.broadcast_to(fr, (self.n_nodes,))
        return out


def build_mesh(L, nz, nr):
    """Structured Q1 mesh of ``(0, L) x (0, 1)`` with 2x2 Gauss quadrature."""
    if not (L > 0) or int(nz) != nz or int(nr) != nr or nz < 1 or nr < 1:
        raise ConfigurationError(f"invalid fluid mesh L={L}, nz={nz}, nr={nr}")
    L, nz, nr = float(L), int(nz), int(nr)
    zs = np.linspace(0.0, L, nz + 1)
    rs = np.linspace(0.0, 1.0, nr + 1)
    Z, R = np.meshgrid(zs, rs)  # row j, column i -> index i + j*(nz+1)
    nodes = np.column_stack([Z.ravel(), R.ravel()])

    ii, jj = np.meshgrid(np.arange(nz), np.arange(nr))
    ii, jj = ii.ravel(), jj.ravel()
    n0 = ii + jj * (nz + 1)
    cells = np.column_stack([n0, n0 + 1, n0 + 1 + (nz + 1), n0 + (nz + 1)])

    # bottom < inlet/outlet < gamma_top priority for corner nodes
    tags = np.full(nodes.shape[0], INTERIOR, dtype=int)
    idx = lambda i, j: i + j * (nz + 1)  # noqa: E731
    tags[idx(np.arange(nz + 1), 0)] = BOTTOM
    tags[idx(0, np.arange(nr + 1))] = INLET
    tags[idx(nz, np.arange(nr + 1))] = OUTLET
    tags[idx(np.arange(nz + 1), nr)] = GAMMA_TOP

    edges, etags = [], []
    for i in range(nz):
        edges.append((idx(i, 0), idx(i + 1, 0)))
        etags.append(BOTTOM)
        edges.append((idx(i, nr), idx(i + 1, nr)))
        etags.append(GAMMA_TOP)
    for j in range(nr):
        edges.append((idx(0, j), idx(0, j + 1)))
        etags.append(INLET)
        edges.append((idx(nz, j), idx(nz, j + 1)))
        etags.append(OUTLET)

    # tensor 2x2 Gauss; local node order (0,0),(1,0),(1,1),(0,1)
    gx, gw = gauss_legendre(2)
    sx, sy = np.meshgrid(gx, gx)
    sx, sy = sx.ravel(), sy.ravel()
    sw = np.outer(gw, gw).ravel()
    hz, hr = L / nz, 1.0 / nr
    lphi = np.column_stack([(1 - sx) * (1 - sy), sx * (1 - sy), sx * sy, (1 - sx) * sy])
    ldz = np.column_stack([-(1 - sy), (1 - sy), sy, -sy]) / hz
    ldr = np.column_stack([-(1 - sx), -sx, sx, (1 - sx)]) / hr
    nc, nl = cells.shape[0], sx.size
    z0 = nodes[cells[:, 0], 0]
    r0 = nodes[cells[:, 0], 1]
    qz = (z0[:, None] + hz * sx[None, :]).ravel()
    qr = (r0[:, None] + hr * sy[None, :]).ravel()
    qw = np.tile(sw * hz * hr, nc)
    qcell = np.repeat(np.arange(nc), nl)
    qnodes = cells[qcell]
    qphi = np.tile(lphi, (nc, 1))
    qdphi = np.tile(np.stack([ldz, ldr], axis=2), (nc, 1, 1))

    return RefMesh(L, nz, nr, nodes, cells, tags, np.array(edges), np.array(etags),
                   qz, qr, qw, qcell, qnodes, qphi, qdphi)


def hermite_basis(t, h, deriv=0):
    """Cubic Hermite shape functions on a cell of length ``h``.

    Returns an array (..., 4) ordered (value_left, slope_left, value_right,
    slope_right); ``deriv`` is taken with respect to the physical coordinate.
    """
    t = np.asarray(t, dtype=float)
    if deriv == 0:
        b = [1 - 3 * t**2 + 2 * t**3, h * (t - 2 * t**2 + t**3),
             3 * t**2 - 2 * t**3, h * (-t**2 + t**3)]
    elif deriv == 1:
        b = [(-6 * t + 6 * t**2) / h, 1 - 4 * t + 3 * t**2,
             (6 * t - 6 * t**2) / h, -2 * t + 3 * t**2]
    elif deriv == 2:
        b = [(-6 + 12 * t) / h**2, (-4 + 6 * t) / h,
             (6 - 12 * t) / h**2, (-2 + 6 * t) / h]
    elif deriv == 3:
        one = np.ones_like(t)
        b = [12 * one / h**3, 6 * one / h**2, -12 * one / h**3, 6 * one / h**2]
    else:
        raise ValueError("deriv must be 0..3")
    return np.stack(b, axis=-1)


@dataclass(frozen=True, eq=False)
class StructureMesh:
    L: float
    ns: int
    nodes: np.ndarray
    constrained: np.ndarray  # per-component constrained local dofs
    free: np.ndarray  # free dofs in the two-component layout
    qx: np.ndarray
    qw: np.ndarray
    qcell: np.ndarray
    qdofs: np.ndarray  # (nsq, 4) per-component dofs of the owning cell
    qbasis: np.ndarray  # (3, nsq, 4) basis values for derivatives 0..2

    @property
    def h(self):
        return self.L / self.ns

    @property
    def ndof(self):
        """Dofs per component."""
        return 2 * (self.ns + 1)

    @property
    def n_dofs(self):
        return 2 * self.ndof

    @property
    def nq(self):
        return self.qw.size

    @property
    def mask(self):
        """Boolean mask of constrained dofs in the two-component layout."""
        m = np.zeros(self.n_dofs, dtype=bool)
        m[self.constrained] = True
        m[self.constrained + self.ndof] = True
        return m

    def cell_dofs(self, cell):
        return 2 * np.asarray(cell)[..., None] + np.arange(4)

    def locate(self, x):
        """Cell index and local coordinate for points in [0, L]."""
        x = np.asarray(x, dtype=float)
        cell = np.clip(np.floor(x / self.h).astype(int), 0, self.ns - 1)
        return cell, x / self.h - cell

    def evaluate(self, coeffs, x, deriv=0):
        """Evaluate one scalar component (``ndof`` coefficients) at points ``x``."""
        coeffs = _check_len(coeffs, self.ndof, "structure component")
        cell, t = self.locate(x)
        return np.einsum("...k,...k->...", hermite_basis(t, self.h, deriv),
                         coeffs[self.cell_dofs(cell)])

    def values(self, eta, deriv=0):
        """Two-component field at quadrature points, shape (nsq, 2)."""
        eta = _check_len(eta, self.n_dofs, "structure field")
        b = self.qbasis[deriv]
        return np.stack([np.einsum("qk,qk->q", b, eta[: self.ndof][self.qdofs]),
                         np.einsum("qk,qk->q", b, eta[self.ndof:][self.qdofs])], axis=1)

    def interpolate(self, fn, dfn):
        """Hermite interpolant of a scalar profile; clamped dofs are zeroed."""
        c = np.empty(self.ndof)
        c[0::2] = fn(self.nodes)
        c[1::2] = dfn(self.nodes)
        c[self.constrained] = 0.0
        return c

    def profile(self, eta, component):
        """Callable view of one component of a two-component field."""
        eta = _check_len(eta, self.n_dofs, "structure field")
        lo = 0 if component in (0, "z") else self.ndof
        return HermiteProfile(self, np.array(eta[lo: lo + self.ndof]))


def build_structure_mesh(L, ns, n_gauss=4):
    """C1 Hermite mesh of ``(0, L)`` with clamped ends."""
    if not (L > 0) or int(ns) != ns or ns < 2:
        raise ConfigurationError(f"invalid structure mesh L={L}, ns={ns} (need ns >= 2)")
    L, ns = float(L), int(ns)
    nodes = np.linspace(0.0, L, ns + 1)
    ndof = 2 * (ns + 1)
    constrained = np.array([0, 1, ndof - 2, ndof - 1])
    keep = np.setdiff1d(np.arange(ndof), constrained)
    free = np.concatenate([keep, keep + ndof])
    h = L / ns
    gx, gw = gauss_legendre(n_gauss)
    qcell = np.repeat(np.arange(ns), n_gauss)
    t = np.tile(gx, ns)
    qx = nodes[qcell] + h * t
    qw = np.tile(gw * h, ns)
    qdofs = 2 * qcell[:, None] + np.arange(4)
    qbasis = np.stack([hermite_basis(t, h, d) for d in range(3)])
    return StructureMesh(L, ns, nodes, constrained, free, qx, qw, qcell, qdofs, qbasis)


@dataclass(frozen=True, eq=False)
class HermiteProfile:
    """Scalar C1 profile on Gamma: ``p(x, deriv=0)``."""

    smesh: StructureMesh
    coeffs: np.ndarray

    def __call__(self, x, deriv=0):
        return self.smesh.evaluate(self.coeffs, x, deriv)

    def min_value(self, deriv=0):
        """Exact minimum over [0, L] of the ``deriv``-th derivative (deriv <= 2)."""
        sm, c = self.smesh, self.coeffs
        h = sm.h
        v0, s0 = c[0:-2:2], c[1:-2:2] * h
        v1, s1 = c[2::2], c[3::2] * h
        a = np.stack([v0, s0, -3 * v0 - 2 * s0 + 3 * v1 - s1, 2 * v0 + s0 - 2 * v1 + s1], axis=1)
        # power-basis coefficients in t of the requested derivative, scaled to x
        for _ in range(deriv):
            a = a[:, 1:] * np.arange(1, a.shape[1])[None, :] / h
        cand = [np.polynomial.polynomial.polyval(0.0, a.T), np.polynomial.polynomial.polyval(1.0, a.T)]
        if a.shape[1] >= 3:
            da = a[:, 1:] * np.arange(1, a.shape[1])[None, :]
            for t in _unit_roots(da):
                val = np.where(np.isnan(t), np.inf, _polyval_rows(a, np.nan_to_num(t)))
                cand.append(val)
        return float(np.min(np.min(np.stack(cand), axis=0)))


def _polyval_rows(a, t):
    out = np.zeros_like(t)
    for k in range(a.shape[1] - 1, -1, -1):
        out = out * t + a[:, k]
    return out


def _unit_roots(da):
    """Real roots in (0, 1) of per-row polynomials of degree <= 2 (NaN if none)."""
    c0 = da[:, 0]
    c1 = da[:, 1] if da.shape[1] > 1 else np.zeros_like(c0)
    c2 = da[:, 2] if da.shape[1] > 2 else np.zeros_like(c0)
    roots = []
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = np.where(np.abs(c1) > 0, -c0 / c1, np.nan)
        disc = c1**2 - 4 * c2 * c0
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        quad = abs(c2) > 1e-300
        r1 = np.where(quad, (-c1 + sq) / (2 * c2), lin)
        r2 = np.where(quad, (-c1 - sq) / (2 * c2), np.nan)
    for r in (r1, r2):
        roots.append(np.where((r > 0) & (r < 1), r, np.nan))
    return roots


@dataclass(frozen=True, eq=False)
class GammaQuadrature:
    """Composite quadrature on the top boundary shared by both meshes.

    Breakpoints are the union of fluid top-edge nodes and structure nodes, so
    each sub-interval sees polynomial traces of both discretizations.
    """

    z: np.ndarray
    w: np.ndarray
    tnodes: np.ndarray  # (nb, 2) fluid nodes on the top row
    tphi: np.ndarray  # (nb, 2) linear trace weights
    sdofs: np.ndarray  # (nb, 4) per-component structure dofs
    sphi: np.ndarray  # (nb, 4) Hermite values

    @property
    def nb(self):
        return self.w.size


def build_gamma_quadrature(mesh, smesh, n_gauss=4):
    if not np.isclose(mesh.L, smesh.L, rtol=1e-14, atol=0):
        raise ShapeError(f"fluid length {mesh.L} != structure length {smesh.L}")
    brk = np.union1d(np.linspace(0.0, mesh.L, mesh.nz + 1), smesh.nodes)
    brk = brk[np.concatenate([[True], np.diff(brk) > 1e-12 * mesh.L])]
    brk[-1] = mesh.L
    gx, gw = gauss_legendre(n_gauss)
    lens = np.diff(brk)
    z = (brk[:-1, None] + lens[:, None] * gx[None, :]).ravel()
    w = (lens[:, None] * gw[None, :]).ravel()
    i = np.clip(np.floor(z / mesh.hz).astype(int), 0, mesh.nz - 1)
    t = z / mesh.hz - i
    tnodes = np.column_stack([mesh.node_index(i, mesh.nr), mesh.node_index(i + 1, mesh.nr)])
    tphi = np.column_stack([1 - t, t])
    cell, ts = smesh.locate(z)
    return GammaQuadrature(z, w, tnodes, tphi, smesh.cell_dofs(cell), hermite_basis(ts, smesh.h))


@dataclass(frozen=True, eq=False)
class Discretization:
    """Fluid mesh, structure mesh and their shared boundary quadrature."""

    mesh: RefMesh
    smesh: StructureMesh
    gamma: GammaQuadrature = field(repr=False)

    @property
    def n_u(self):
        return self.mesh.n_dofs

    @property
    def n_v(self):
        return self.smesh.n_dofs


def build_discretization(L, nz, nr, ns):
    mesh = build_mesh(L, nz, nr)
    smesh = build_structure_mesh(L, ns)
    return Discretization(mesh, smesh, build_gamma_quadrature(mesh, smesh))


def _scatter_scalar(rows, cols, vals, n):
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def _weighted_mass_unchecked(mesh, weight, components=1):
    if isinstance(mesh, StructureMesh):
        b = mesh.qbasis[0]
        vals = (mesh.qw * weight)[:, None, None] * b[:, :, None] * b[:, None, :]
        rows = np.broadcast_to(mesh.qdofs[:, :, None], vals.shape)
        cols = np.broadcast_to(mesh.qdofs[:, None, :], vals.shape)
        m = _scatter_scalar(rows, cols, vals, mesh.ndof)
        n = mesh.ndof
    else:
        vals = (mesh.qw * weight)[:, None, None] * mesh.qphi[:, :, None] * mesh.qphi[:, None, :]
        rows = np.broadcast_to(mesh.qnodes[:, :, None], vals.shape)
        cols = np.broadcast_to(mesh.qnodes[:, None, :], vals.shape)
        m = _scatter_scalar(rows, cols, vals, mesh.n_nodes)
        n = mesh.n_nodes
    del n
    if components == 1:
        return m
    return sp.block_diag([m] * components, format="csr")


def mass_matrix(mesh, components=1):
    """Unweighted mass matrix of the fluid (Q1) or structure (Hermite) space."""
    w = np.ones(mesh.nq)
    return _weighted_mass_unchecked(mesh, w, components)


def weighted_mass(mesh, weight, components=1):
    """Mass matrix with a strictly positive weight given at quadrature points."""
    weight = np.broadcast_to(np.asarray(weight, dtype=float), (mesh.nq,))
    if not np.all(weight > 0):
        raise DegenerateFrameError(f"mass weight not positive (min {weight.min():.3e})")
    return _weighted_mass_unchecked(mesh, weight, components)


def stiffness_matrix(smesh, deriv):
    """Per-component Hermite stiffness ``int p^(d) q^(d)`` for d = 1 or 2."""
    b = smesh.qbasis[deriv]
    vals = smesh.qw[:, None, None] * b[:, :, None] * b[:, None, :]
    rows = np.broadcast_to(smesh.qdofs[:, :, None], vals.shape)
    cols = np.broadcast_to(smesh.qdofs[:, None, :], vals.shape)
    return _scatter_scalar(rows, cols, vals, smesh.ndof)


def mesh_summary(mesh):
    """JSON-ready description of a fluid mesh."""
    counts = {TAGS[t]: int(np.sum(mesh.node_tags == t)) for t in range(len(TAGS))}
    ecounts = {TAGS[t]: int(np.sum(mesh.edge_tags == t)) for t in range(1, len(TAGS))}
    return {
        "L": mesh.L,
        "nz": mesh.nz,
        "nr": mesh.nr,
        "n_nodes": mesh.n_nodes,
        "n_cells": int(mesh.cells.shape[0]),
        "n_boundary_edges": int(mesh.edges.shape[0]),
        "node_tags": counts,
        "edge_tags": ecounts,
        "corner_priority": ["gamma_top", "inlet/outlet", "bottom"],
    }


def _check_len(x, n, what):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ShapeError(f"{what}: expected shape ({n},), got {x.shape}")
    return x


def smooth_random_eta(rng, smesh, amplitude=0.02, modes=3):
    """Random smooth clamped displacement ``sin(pi z/L)^2 * sum_k a_k cos(k pi z/L)``.

    Both components are drawn independently with ``|a_k| <= amplitude``; the
    result is the Hermite interpolant in the two-component layout.
    """
    L = smesh.L
    out = []
    for _ in range(2):
        a = amplitude * rng.uniform(-1, 1, modes)
        k = np.arange(modes)

        def f(x, a=a):
            s = np.sin(np.pi * x / L)
            return s**2 * (np.cos(np.pi * np.outer(x, k) / L) @ a)

        def df(x, a=a):
            s, ds = np.sin(np.pi * x / L), np.pi / L * np.cos(np.pi * x / L)
            c = np.cos(np.pi * np.outer(x, k) / L) @ a
            dc = -(np.pi / L) * (np.sin(np.pi * np.outer(x, k) / L) * k) @ a
            return 2 * s * ds * c + s**2 * dc

        out.append(smesh.interpolate(f, df))
    return np.concatenate(out)
