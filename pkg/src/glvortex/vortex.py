"""Topological diagnostics: bad set, ball covering, degrees and boundary indices.

The bad set collects vertices with |u| below 1/2.  Its edge-connected
components are covered by balls of radius at least ``radius_mult * eps``
(merged until mutually disjoint), classified as interior or boundary by
whether they touch the outermost ring.  Interior balls get a winding number
from a vertex loop around the core; boundary balls get an integer index from
the phase change of u along an interior arc measured against the rotation of
the boundary tangent between the arc endpoints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    DegenerateOnArcError,
    DegenerateOnLoopError,
    NotTangentialAtEndpointsError,
)
from .geometry import DomainGeometry
from .mesh import TriMesh

MAG_FLOOR = 0.1
ENDPOINT_TANGENT_TOL = 0.2
LOOP_SCALES = (1.5, 2.0, 2.5)


@dataclass
class VortexBall:
    center: np.ndarray
    radius: float
    kind: str             # "interior" or "boundary"
    index: int = 0        # degree d (interior) or boundary index D
    spread: float = 0.0   # raw component extent before the radius_mult*eps floor


@dataclass
class VortexReport:
    interior: list
    boundary: list
    index_sum: Fraction
    bad_vertex_count: int

    def to_json_dict(self):
        return {
            "interior": [
                {"x": b.center[0], "y": b.center[1], "r": b.radius, "d": b.index}
                for b in self.interior
            ],
            "boundary": [
                {"x": b.center[0], "y": b.center[1], "r": b.radius, "D": b.index}
                for b in self.boundary
            ],
            "index_sum": float(self.index_sum),
            "bad_vertex_count": self.bad_vertex_count,
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)


def bad_set(u, threshold=0.5):
    """Indices of vertices with |u| < threshold."""
    mag = np.linalg.norm(np.asarray(u, dtype=float), axis=1)
    return np.where(mag < threshold)[0]


def _components(bad, mesh: TriMesh):
    bad = np.asarray(bad, dtype=np.int64)
    in_bad = np.zeros(mesh.n_vertices, dtype=bool)
    in_bad[bad] = True
    adj = {int(i): [] for i in bad}
    t = mesh.triangles
    for a, b in ((0, 1), (1, 2), (2, 0)):
        for i, j in zip(t[:, a], t[:, b]):
            if in_bad[i] and in_bad[j]:
                adj[int(i)].append(int(j))
                adj[int(j)].append(int(i))
    seen = set()
    comps = []
    for i in sorted(adj):
        if i in seen:
            continue
        stack, comp = [i], []
        seen.add(i)
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def _merge_until_disjoint(balls, geom):
    balls = list(balls)
    changed = True
    while changed:
        changed = False
        for i in range(len(balls)):
            for j in range(i + 1, len(balls)):
                bi, bj = balls[i], balls[j]
                if np.linalg.norm(bi.center - bj.center) < bi.radius + bj.radius:
                    merged = _merge_pair(bi, bj, geom)
                    balls = [b for k, b in enumerate(balls) if k not in (i, j)]
                    balls.append(merged)
                    changed = True
                    break
            if changed:
                break
    return balls


def _merge_pair(bi, bj, geom):
    d = np.linalg.norm(bj.center - bi.center)
    if d < 1e-14:
        center = bi.center.copy()
        radius = max(bi.radius, bj.radius)
    else:
        radius = 0.5 * (d + bi.radius + bj.radius)
        center = bi.center + (bj.center - bi.center) * ((radius - bi.radius) / d)
    kind = "boundary" if "boundary" in (bi.kind, bj.kind) else "interior"
    if kind == "boundary":
        s = geom.closest_boundary_arclength(center[None, :])[0]
        center = geom.boundary_point(s)
        radius = max(np.linalg.norm(center - bi.center) + bi.radius,
                     np.linalg.norm(center - bj.center) + bj.radius)
    spread = max(np.linalg.norm(center - bi.center) + bi.spread,
                 np.linalg.norm(center - bj.center) + bj.spread)
    return VortexBall(center=center, radius=float(radius), kind=kind, spread=float(spread))


def cover_components(bad, mesh: TriMesh, geom: DomainGeometry, eps, radius_mult=10.0):
    """Disjoint covering balls for the edge-connected components of the bad set."""
    comps = _components(bad, mesh)
    bd_mask = mesh.is_boundary_vertex()
    balls = []
    for comp in comps:
        pts = mesh.vertices[comp]
        center = pts.mean(axis=0)
        on_bd = bool(np.any(bd_mask[comp]))
        if on_bd:
            s = geom.closest_boundary_arclength(center[None, :])[0]
            center = geom.boundary_point(s)
        spread = float(np.max(np.linalg.norm(pts - center, axis=1)))
        radius = max(spread, radius_mult * eps)
        balls.append(VortexBall(center=center, radius=radius,
                                kind="boundary" if on_bd else "interior", spread=spread))
    balls = _merge_until_disjoint(balls, geom)
    return sorted(balls, key=lambda b: (b.kind, b.center[0], b.center[1]))


def phase_lift(values):
    """Continuous phase lift of nonvanishing 2-vector samples along a path."""
    values = np.asarray(values, dtype=float)
    theta = np.arctan2(values[:, 1], values[:, 0])
    d = np.diff(theta)
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    return np.concatenate(([theta[0]], theta[0] + np.cumsum(d)))


def winding_number(values):
    """Degree of a closed counterclockwise loop of field samples."""
    values = np.asarray(values, dtype=float)
    mag = np.linalg.norm(values, axis=1)
    if np.min(mag) < MAG_FLOOR:
        raise DegenerateOnLoopError(f"|u| dips to {np.min(mag):.3g} on the loop")
    closed = np.concatenate([values, values[:1]], axis=0)
    lift = phase_lift(closed)
    return int(round((lift[-1] - lift[0]) / (2.0 * np.pi)))


def boundary_index_from_samples(u_arc, tau_phase_change):
    """Boundary index from arc samples of u and the tangent's phase change.

    ``u_arc`` runs along the interior arc from the forward-tangent endpoint to
    the backward one; ``tau_phase_change`` is the continuous phase change of
    the boundary tangent between the same endpoints (through the ball centre).
    """
    u_arc = np.asarray(u_arc, dtype=float)
    mag = np.linalg.norm(u_arc, axis=1)
    if np.min(mag) < MAG_FLOOR:
        raise DegenerateOnArcError(f"|u| dips to {np.min(mag):.3g} on the arc")
    lift = phase_lift(u_arc)
    delta = (lift[-1] - lift[0]) - tau_phase_change
    return int(round(delta / np.pi))


MAX_ANGULAR_GAP = 0.7


def _loop_vertices(mesh, center, r, band):
    d = np.linalg.norm(mesh.vertices - center, axis=1)
    return np.where(np.abs(d - r) <= band)[0]


def interior_degree(u, mesh: TriMesh, ball: VortexBall, scale):
    """Winding number on the vertex loop nearest the circle of radius scale*r."""
    r = scale * ball.radius
    sel = _loop_vertices(mesh, ball.center, r, band=0.75 * mesh.h)
    if sel.size < 8:
        sel = _loop_vertices(mesh, ball.center, r, band=1.5 * mesh.h)
    if sel.size < 8:
        raise DegenerateOnLoopError("too few vertices near the winding loop")
    rel = mesh.vertices[sel] - ball.center
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    order = np.argsort(ang)
    gaps = np.diff(ang[order], append=ang[order][0] + 2.0 * np.pi)
    if np.max(gaps) > MAX_ANGULAR_GAP:
        raise DegenerateOnLoopError("winding loop leaves the meshed domain")
    return winding_number(np.asarray(u)[sel[order]])


def _arc_endpoints(geom, q_s, r):
    """Arclengths where the circle of radius r about gamma(q_s) crosses the boundary."""
    L = geom.arclength_total
    q = geom.boundary_point(q_s)

    def crossing(sign):
        lo, hi = 0.0, min(0.5 * L, 4.0 * r)
        f = lambda t: np.linalg.norm(geom.boundary_point(q_s + sign * t) - q) - r
        while f(hi) < 0:
            hi = min(hi * 1.5, 0.5 * L)
            if hi >= 0.5 * L - 1e-12:
                break
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if f(mid) < 0:
                lo = mid
            else:
                hi = mid
        return q_s + sign * 0.5 * (lo + hi)

    return crossing(+1.0), crossing(-1.0)   # forward (A), backward (B)


def tau_phase_change(geom, s_from, s_to, n_samples=512):
    """Continuous phase change of the boundary tangent from s_from to s_to."""
    s = np.linspace(s_from, s_to, n_samples)
    _, tau = geom.frame(s)
    lift = phase_lift(tau)
    return float(lift[-1] - lift[0])


def boundary_index(u, mesh: TriMesh, geom: DomainGeometry, ball: VortexBall, scale):
    """Integer index of a boundary ball from the relative phase over its arc."""
    r = scale * ball.radius
    s_q = geom.closest_boundary_arclength(ball.center[None, :])[0]
    s_a, s_b = _arc_endpoints(geom, s_q, r)
    q = geom.boundary_point(s_q)

    sel = _loop_vertices(mesh, q, r, band=0.75 * mesh.h)
    if sel.size < 8:
        sel = _loop_vertices(mesh, q, r, band=1.5 * mesh.h)
    if sel.size < 8:
        raise DegenerateOnArcError("too few vertices near the index arc")

    a_dir = geom.boundary_point(s_a) - q
    psi_a = np.arctan2(a_dir[1], a_dir[0])
    rel = mesh.vertices[sel] - q
    delta = np.mod(np.arctan2(rel[:, 1], rel[:, 0]) - psi_a, 2.0 * np.pi)
    b_dir = geom.boundary_point(s_b) - q
    span = np.mod(np.arctan2(b_dir[1], b_dir[0]) - psi_a, 2.0 * np.pi)
    keep = delta <= span + 1e-9
    sel, delta = sel[keep], delta[keep]
    if sel.size < 8:
        raise DegenerateOnArcError("interior arc not resolved by the mesh")
    order = np.argsort(delta)
    sel, delta = sel[order], delta[order]
    if np.max(np.diff(delta), initial=0.0) > MAX_ANGULAR_GAP:
        raise DegenerateOnArcError("index arc leaves the meshed domain")

    u = np.asarray(u, dtype=float)
    for end in (sel[0], sel[-1]):
        x = mesh.vertices[end]
        s_e = geom.closest_boundary_arclength(x[None, :])[0]
        n_e, _ = geom.frame(s_e)
        val = u[end]
        mag = np.linalg.norm(val)
        if mag < MAG_FLOOR:
            raise DegenerateOnArcError("endpoint magnitude too small")
        if abs(float(val @ n_e)) / mag > ENDPOINT_TANGENT_TOL:
            raise NotTangentialAtEndpointsError(
                f"normal component {abs(float(val @ n_e)) / mag:.3f} at an arc endpoint")

    lift_u = phase_lift(u[sel])
    dtau = -tau_phase_change(geom, s_b, s_a)   # change from A to B, through q
    delta_phase = (lift_u[-1] - lift_u[0]) - dtau
    return int(round(delta_phase / np.pi))


def analyze(u, p, mesh: TriMesh, geom: DomainGeometry, radius_mult=10.0) -> VortexReport:
    """Full report: bad set, covering balls, degrees/indices and their sum."""
    bad = bad_set(u)
    balls = cover_components(bad, mesh, geom, eps=p.eps, radius_mult=radius_mult)
    interior, boundary = [], []
    for ball in balls:
        # core-safe shrink fallbacks for when the enlarged loops would poke
        # outside the domain (tight domains relative to radius_mult * eps)
        shrink = [max(5.0 * p.eps, 1.5 * ball.spread, 4.0 * mesh.h) / ball.radius,
                  max(3.5 * p.eps, 1.25 * ball.spread, 3.0 * mesh.h) / ball.radius]
        scales = list(LOOP_SCALES) + [s for s in shrink if s < LOOP_SCALES[0]]
        last = None
        for scale in scales:
            try:
                if ball.kind == "interior":
                    ball.index = interior_degree(u, mesh, ball, scale)
                else:
                    ball.index = boundary_index(u, mesh, geom, ball, scale)
                last = None
                break
            except (DegenerateOnLoopError, DegenerateOnArcError,
                    NotTangentialAtEndpointsError) as exc:
                last = exc
        if last is not None:
            raise type(last)(f"ball at {np.round(ball.center, 4)}: {last}")
        (interior if ball.kind == "interior" else boundary).append(ball)
    index_sum = Fraction(sum(b.index for b in interior)) + Fraction(sum(b.index for b in boundary), 2)
    return VortexReport(interior=interior, boundary=boundary,
                        index_sum=index_sum, bad_vertex_count=int(len(bad)))


def eta_check(u, report: VortexReport, mesh: TriMesh, threshold=0.5):
    """True iff |u| >= threshold at every vertex outside the report's balls."""
    mag = np.linalg.norm(np.asarray(u, dtype=float), axis=1)
    outside = np.ones(mesh.n_vertices, dtype=bool)
    for ball in report.interior + report.boundary:
        d = np.linalg.norm(mesh.vertices - ball.center, axis=1)
        outside &= d > ball.radius
    return bool(np.all(mag[outside] >= threshold))
