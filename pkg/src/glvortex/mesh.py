"""Boundary-fitted triangulations of star-shaped domains.

The mesh is a deterministic ring-and-fan (hexagonal) triangulation: one centre
vertex at the domain centroid, ring m carrying 6*m vertices on the scaled
boundary curve, and the outermost ring lying exactly on the boundary.  An
optional mirrored collar of exterior vertices supports reflection-extension
checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadGeometryError, MissingCollarError, OutOfTubeError
from .geometry import DomainGeometry


@dataclass
class TriMesh:
    vertices: np.ndarray          # (V, 2)
    triangles: np.ndarray         # (T, 3) counterclockwise
    boundary_idx: np.ndarray      # (B,) vertex indices on the boundary
    boundary_s: np.ndarray        # (B,) arclength of each boundary vertex
    boundary_n: np.ndarray        # (B, 2) outward normals
    boundary_tau: np.ndarray      # (B, 2) unit tangents
    boundary_kappa: np.ndarray    # (B,) boundary curvature
    center: np.ndarray            # (2,) fan centre (domain centroid)
    h: float                      # max edge length
    rings: int
    collar_pairs: np.ndarray | None = None   # (C, 2) interior/exterior vertex indices
    collar_s: np.ndarray | None = None       # (C,) chart arclength of each pair
    collar_depth: float | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def is_boundary_vertex(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_idx] = True
        return mask


def _ring_offset(m):
    # vertices before ring m: 1 + 6*(1 + ... + (m-1))
    return 1 + 3 * m * (m - 1)


def build_mesh(geom: DomainGeometry, rings: int) -> TriMesh:
    """Ring-and-fan triangulation with the outermost ring exactly on the boundary."""
    if rings < 2:
        raise ValueError("rings must be >= 2")
    if not geom.star_shaped:
        raise BadGeometryError("domain is not star-shaped about its centroid")

    L = geom.arclength_total
    c = geom.centroid
    M = int(rings)

    verts = [c[None, :]]
    for m in range(1, M + 1):
        s = L * np.arange(6 * m) / (6 * m)
        pts = geom.boundary_point(s)
        verts.append(c + (m / M) * (pts - c))
    vertices = np.concatenate(verts, axis=0)

    tris = []
    for j in range(6):
        tris.append((0, _ring_offset(1) + j, _ring_offset(1) + (j + 1) % 6))
    for m in range(2, M + 1):
        off_o, off_i = _ring_offset(m), _ring_offset(m - 1)
        no, ni = 6 * m, 6 * (m - 1)
        for q in range(6):
            for i in range(m):
                a = off_o + (q * m + i) % no
                b = off_o + (q * m + i + 1) % no
                d = off_i + (q * (m - 1) + i) % ni
                tris.append((a, b, d))
            for i in range(m - 1):
                a = off_o + (q * m + i + 1) % no
                b = off_i + (q * (m - 1) + i + 1) % ni
                d = off_i + (q * (m - 1) + i) % ni
                tris.append((a, b, d))
    triangles = np.array(tris, dtype=np.int64)

    p0 = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - p0
    e2 = vertices[triangles[:, 2]] - p0
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    if np.any(areas <= 0):
        raise BadGeometryError("triangulation produced non-positive areas")

    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    h = float(np.max(np.linalg.norm(vertices[edges[:, 0]] - vertices[edges[:, 1]], axis=1)))

    s_bd = L * np.arange(6 * M) / (6 * M)
    n_bd, tau_bd = geom.frame(s_bd)
    return TriMesh(
        vertices=vertices,
        triangles=triangles,
        boundary_idx=np.arange(_ring_offset(M), _ring_offset(M) + 6 * M, dtype=np.int64),
        boundary_s=s_bd,
        boundary_n=n_bd,
        boundary_tau=tau_bd,
        boundary_kappa=np.asarray(geom.curvature(s_bd)),
        center=geom.centroid.copy(),
        h=h,
        rings=M,
    )


def mirror_collar(geom: DomainGeometry, mesh: TriMesh, depth: float) -> TriMesh:
    """Augment the mesh with exterior partners of interior vertices near the boundary."""
    if depth > geom.tubular_width * (1 + 1e-12):
        raise OutOfTubeError("collar depth exceeds tubular width")

    bd_mask = mesh.is_boundary_vertex()
    inner = np.where(~bd_mask)[0]
    d = geom.distance_to_boundary(mesh.vertices[inner])
    sel = inner[d < depth]
    if sel.size == 0:
        raise OutOfTubeError("no interior vertices inside the requested collar depth")

    s, y2 = geom.cartesian_to_tubular(mesh.vertices[sel])
    exterior = geom.tubular_to_cartesian((s, -y2))

    V = mesh.n_vertices
    pairs = np.stack([sel, V + np.arange(sel.size)], axis=1)
    return TriMesh(
        vertices=np.concatenate([mesh.vertices, exterior], axis=0),
        triangles=mesh.triangles,
        boundary_idx=mesh.boundary_idx,
        boundary_s=mesh.boundary_s,
        boundary_n=mesh.boundary_n,
        boundary_tau=mesh.boundary_tau,
        boundary_kappa=mesh.boundary_kappa,
        center=mesh.center,
        h=mesh.h,
        rings=mesh.rings,
        collar_pairs=pairs,
        collar_s=s,
        collar_depth=float(depth),
    )


def audit_mesh(mesh: TriMesh, geom: DomainGeometry) -> dict:
    """Structural checks: positive areas, boundary on the curve, Euler characteristic."""
    v, t = mesh.vertices, mesh.triangles
    p0 = v[t[:, 0]]
    e1 = v[t[:, 1]] - p0
    e2 = v[t[:, 2]] - p0
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    bd_pts = v[mesh.boundary_idx]
    bd_err = np.max(np.linalg.norm(bd_pts - geom.boundary_point(mesh.boundary_s), axis=1))

    edges = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    n_edges = np.unique(edges, axis=0).shape[0]
    interior_v = np.setdiff1d(np.arange(_ring_offset(mesh.rings) + 6 * mesh.rings), [])
    euler = interior_v.size - n_edges + t.shape[0]

    # edge connectivity via BFS over triangle adjacency
    adj = [[] for _ in range(interior_v.size)]
    for a, b in np.unique(edges, axis=0):
        adj[a].append(b)
        adj[b].append(a)
    seen = np.zeros(interior_v.size, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in adj[i]:
            if not seen[j]:
                seen[j] = True
                stack.append(j)

    collar_err = None
    if mesh.collar_pairs is not None:
        refl = geom.reflect(mesh.vertices[mesh.collar_pairs[:, 0]])
        collar_err = float(np.max(np.linalg.norm(refl - mesh.vertices[mesh.collar_pairs[:, 1]], axis=1)))

    return {
        "min_area": float(np.min(areas)),
        "boundary_error": float(bd_err),
        "euler": int(euler),
        "connected": bool(np.all(seen)),
        "collar_error": collar_err,
    }


def export_off(mesh: TriMesh, path):
    """Plain-text OFF-style export: counts, vertex lines `x y`, triangle lines `i j k`."""
    lines = [f"{mesh.n_vertices} {mesh.n_triangles}"]
    for x, y in mesh.vertices:
        lines.append(f"{x:.17g} {y:.17g}")
    for a, b, c in mesh.triangles:
        lines.append(f"{a} {b} {c}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def require_collar(mesh: TriMesh):
    if mesh.collar_pairs is None:
        raise MissingCollarError("mesh has no mirrored collar")
