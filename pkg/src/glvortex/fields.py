"""Discrete vector fields and the penalized Ginzburg-Landau energies.

Fields are per-vertex 2-vectors on a :class:`~glvortex.mesh.TriMesh` with
piecewise-linear (P1) interpolation: gradients, divergence and curl are
constant per triangle, and the potential term uses vertex-lumped quadrature.
With e = |grad u|^2 the total energy is

    1/2 * int e  +  k/2 * int (div u)^2 or (curl u)^2  +  1/(4 eps^2) * int (1-|u|^2)^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import MeshMismatchError
from .geometry import perp
from .mesh import TriMesh

PENALTY_DIV = "div"
PENALTY_CURL = "curl"
BC_TANGENTIAL = "tangential"
BC_DIRICHLET = "dirichlet"


@dataclass
class EnergyParams:
    eps: float
    k: float
    penalty: str                       # "div" or "curl"
    bc: str = BC_TANGENTIAL            # "tangential" or "dirichlet"
    dirichlet_values: np.ndarray | None = None   # (B, 2), aligned with boundary_idx
    dirichlet_name: str | None = None  # "tau" or "xperp": derivable on any mesh

    def __post_init__(self):
        if self.eps <= 0 or self.k <= 0:
            raise ValueError("eps and k must be positive")
        if self.penalty not in (PENALTY_DIV, PENALTY_CURL):
            raise ValueError(f"unknown penalty {self.penalty!r}")
        if self.bc not in (BC_TANGENTIAL, BC_DIRICHLET):
            raise ValueError(f"unknown bc {self.bc!r}")
        if self.bc == BC_DIRICHLET and self.dirichlet_values is None and self.dirichlet_name is None:
            raise ValueError("dirichlet bc needs boundary values or a named datum")


def named_dirichlet(name, mesh: TriMesh):
    """Boundary data by name: "tau" (u = tau) or "xperp" (u = x^perp / |x^perp|)."""
    if name == "tau":
        return mesh.boundary_tau.copy()
    if name == "xperp":
        xp = perp(mesh.vertices[mesh.boundary_idx])
        return xp / np.linalg.norm(xp, axis=1, keepdims=True)
    raise ValueError(f"unknown dirichlet datum {name!r}")


def dirichlet_values_for(p: "EnergyParams", mesh: TriMesh):
    if p.dirichlet_values is not None:
        return p.dirichlet_values
    return named_dirichlet(p.dirichlet_name, mesh)


@dataclass
class EnergyBreakdown:
    dirichlet: float
    penalty: float
    potential: float

    @property
    def total(self):
        return self.dirichlet + self.penalty + self.potential


class Operators:
    """Per-mesh discrete operators: P1 derivative matrices and lumped weights."""

    def __init__(self, mesh: TriMesh):
        v, t = mesh.vertices, mesh.triangles
        p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        e1, e2 = p1 - p0, p2 - p0
        area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        self.area = area
        self.total_area = float(area.sum())

        # P1 basis gradients: grad phi_a = perp(opposite edge) / (2 area)
        T = t.shape[0]
        g = np.empty((T, 3, 2))
        g[:, 0] = perp(p2 - p1)
        g[:, 1] = perp(p0 - p2)
        g[:, 2] = perp(p1 - p0)
        g /= (2.0 * area)[:, None, None]

        rows = np.repeat(np.arange(T), 3)
        cols = t.ravel()
        n = mesh.n_vertices
        self.Dx = sp.csr_matrix((g[:, :, 0].ravel(), (rows, cols)), shape=(T, n))
        self.Dy = sp.csr_matrix((g[:, :, 1].ravel(), (rows, cols)), shape=(T, n))
        self.DxT = self.Dx.T.tocsr()
        self.DyT = self.Dy.T.tocsr()

        w = np.zeros(n)
        np.add.at(w, t.ravel(), np.repeat(area / 3.0, 3))
        self.lumped = w

        self.mesh = mesh
        self.bidx = mesh.boundary_idx
        self.btau = mesh.boundary_tau
        self._tree = None

    # -- point location / interpolation --

    def _centroid_tree(self):
        if self._tree is None:
            t, v = self.mesh.triangles, self.mesh.vertices
            self._tree = cKDTree(v[t].mean(axis=1))
        return self._tree

    def locate(self, points):
        """Containing triangle and barycentric coordinates for each query point."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        t, v = self.mesh.triangles, self.mesh.vertices
        tree = self._centroid_tree()
        out_tri = np.full(P.shape[0], -1, dtype=np.int64)
        out_bary = np.zeros((P.shape[0], 3))
        pending = np.arange(P.shape[0])
        for k in (8, 32, 128):
            if pending.size == 0:
                break
            k = min(k, t.shape[0])
            _, cand = tree.query(P[pending], k=k)
            cand = np.atleast_2d(cand)
            for row, pi in enumerate(pending.copy()):
                for ti in cand[row]:
                    lam = self._bary(P[pi], ti)
                    if lam.min() >= -1e-10:
                        out_tri[pi] = ti
                        out_bary[pi] = np.clip(lam, 0.0, 1.0)
                        break
            pending = np.where(out_tri < 0)[0]
        if pending.size:
            # fall back to the nearest centroid with clipped coordinates
            _, cand = tree.query(P[pending], k=1)
            for row, pi in enumerate(pending):
                lam = np.clip(self._bary(P[pi], int(cand[row])), 0.0, None)
                out_tri[pi] = int(cand[row])
                out_bary[pi] = lam / lam.sum()
        return out_tri, out_bary

    def _bary(self, p, ti):
        t, v = self.mesh.triangles[ti], self.mesh.vertices
        a, b, c = v[t[0]], v[t[1]], v[t[2]]
        M = np.array([[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]])
        rhs = p - a
        lam12 = np.linalg.solve(M, rhs)
        return np.array([1.0 - lam12.sum(), lam12[0], lam12[1]])


def operators(mesh: TriMesh) -> Operators:
    ops = mesh._cache.get("ops")
    if ops is None:
        ops = Operators(mesh)
        mesh._cache["ops"] = ops
    return ops


def _check_aligned(u, mesh):
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices, 2):
        raise MeshMismatchError(f"field shape {u.shape} does not match mesh ({mesh.n_vertices}, 2)")
    return u


def grad_components(u, mesh):
    """Per-triangle entries of the P1 gradient: (d1u1, d2u1, d1u2, d2u2)."""
    u = _check_aligned(u, mesh)
    ops = operators(mesh)
    return ops.Dx @ u[:, 0], ops.Dy @ u[:, 0], ops.Dx @ u[:, 1], ops.Dy @ u[:, 1]


def discrete_operators(u, mesh):
    """Per-triangle (div u, curl u, |grad u|^2) of the P1 interpolant."""
    a11, a12, a21, a22 = grad_components(u, mesh)
    div = a11 + a22
    curl = a21 - a12
    gradsq = a11**2 + a12**2 + a21**2 + a22**2
    return div, curl, gradsq


def energy(u, p: EnergyParams, mesh: TriMesh) -> EnergyBreakdown:
    """Energy split into Dirichlet, penalty and potential parts (total = sum)."""
    u = _check_aligned(u, mesh)
    ops = operators(mesh)
    div, curl, gradsq = discrete_operators(u, mesh)
    q = div if p.penalty == PENALTY_DIV else curl
    dir_part = 0.5 * float(ops.area @ gradsq)
    pen_part = 0.5 * p.k * float(ops.area @ (q * q))
    one_m = 1.0 - (u * u).sum(axis=1)
    pot_part = float(ops.lumped @ (one_m * one_m)) / (4.0 * p.eps**2)
    return EnergyBreakdown(dir_part, pen_part, pot_part)


def raw_gradient(u, p: EnergyParams, mesh: TriMesh):
    """Unconstrained first variation dE/du as a (V, 2) array."""
    u = _check_aligned(u, mesh)
    ops = operators(mesh)
    a11, a12, a21, a22 = grad_components(u, mesh)
    aw = ops.area
    g = np.empty_like(u)
    g[:, 0] = ops.DxT @ (aw * a11) + ops.DyT @ (aw * a12)
    g[:, 1] = ops.DxT @ (aw * a21) + ops.DyT @ (aw * a22)
    if p.penalty == PENALTY_DIV:
        q = aw * (p.k * (a11 + a22))
        g[:, 0] += ops.DxT @ q
        g[:, 1] += ops.DyT @ q
    else:
        q = aw * (p.k * (a21 - a12))
        g[:, 0] -= ops.DyT @ q
        g[:, 1] += ops.DxT @ q
    one_m = 1.0 - (u * u).sum(axis=1)
    g -= (ops.lumped * one_m / p.eps**2)[:, None] * u
    return g


def project_bc_gradient(g, p: EnergyParams, mesh: TriMesh):
    """Restrict a raw gradient to the admissible variations of the bc."""
    g = g.copy()
    bidx = mesh.boundary_idx
    if p.bc == BC_TANGENTIAL:
        tau = mesh.boundary_tau
        coef = (g[bidx] * tau).sum(axis=1)
        g[bidx] = coef[:, None] * tau
    else:
        g[bidx] = 0.0
    return g


def gradient(u, p: EnergyParams, mesh: TriMesh):
    """Discrete energy gradient restricted to bc-respecting variations."""
    return project_bc_gradient(raw_gradient(u, p, mesh), p, mesh)


def project_tangential(u, mesh: TriMesh):
    """Replace boundary values by their tangential part; interior unchanged."""
    u = _check_aligned(u, mesh).copy()
    bidx = mesh.boundary_idx
    tau = mesh.boundary_tau
    coef = (u[bidx] * tau).sum(axis=1)
    u[bidx] = coef[:, None] * tau
    return u


def apply_bc(u, p: EnergyParams, mesh: TriMesh):
    """Force the field to satisfy the boundary condition exactly."""
    if p.bc == BC_TANGENTIAL:
        return project_tangential(u, mesh)
    u = _check_aligned(u, mesh).copy()
    u[mesh.boundary_idx] = dirichlet_values_for(p, mesh)
    return u


def interpolate(mesh: TriMesh, u, points):
    """P1 interpolation of a per-vertex field (scalar or 2-vector) at points."""
    ops = operators(mesh)
    tri, bary = ops.locate(points)
    vals = np.asarray(u, dtype=float)[mesh.triangles[tri]]
    return np.einsum("pk,pk...->p...", bary, vals)


def interpolate_gradient(mesh: TriMesh, u, points):
    """Per-point Jacobian J[i, j] = du^i/dx_j of the P1 interpolant."""
    ops = operators(mesh)
    tri, _ = ops.locate(points)
    a11, a12, a21, a22 = grad_components(u, mesh)
    J = np.empty((len(tri), 2, 2))
    J[:, 0, 0] = a11[tri]
    J[:, 0, 1] = a12[tri]
    J[:, 1, 0] = a21[tri]
    J[:, 1, 1] = a22[tri]
    return J


def robin_residual(u, mesh: TriMesh, k, penalty):
    """Boundary-condition residual per boundary vertex.

    Divergence penalty: d_n u_tau.  Curl penalty: (1+k) d_n u_tau + k kappa u_tau.
    The normal derivative is a one-sided difference against the next ring inward.
    """
    u = _check_aligned(u, mesh)
    bidx = mesh.boundary_idx
    x = mesh.vertices[bidx]
    tau, n = mesh.boundary_tau, mesh.boundary_n
    delta = np.linalg.norm(x - mesh.center, axis=1) / mesh.rings
    inner = x - delta[:, None] * n
    u_in = interpolate(mesh, u, inner)
    ut_bd = (u[bidx] * tau).sum(axis=1)
    ut_in = (u_in * tau).sum(axis=1)
    dn_ut = (ut_bd - ut_in) / delta
    if penalty == PENALTY_DIV:
        return dn_ut
    return (1.0 + k) * dn_ut + k * mesh.boundary_kappa * ut_bd


def export_field_csv(mesh: TriMesh, u, path):
    """CSV export `x,y,u1,u2`, one row per vertex, 17 significant digits."""
    u = _check_aligned(u, mesh)
    lines = ["x,y,u1,u2"]
    for (x, y), (u1, u2) in zip(mesh.vertices, u):
        lines.append(f"{x:.17g},{y:.17g},{u1:.17g},{u2:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
