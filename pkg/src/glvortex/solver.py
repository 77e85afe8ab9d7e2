"""Energy minimization by projected gradient descent with Armijo backtracking.

The admissible set (tangential anchoring or Dirichlet data) is a per-vertex
affine constraint, so descent steps stay feasible once the gradient is
projected.  Along a fixed direction the P1 energy is an exact quartic in the
step length, which lets the Armijo test evaluate candidate energies in closed
form instead of reassembling the energy per trial step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import AllDivergedError, DivergedError
from .fields import (
    PENALTY_DIV,
    EnergyBreakdown,
    EnergyParams,
    apply_bc,
    grad_components,
    operators,
    project_bc_gradient,
    project_tangential,
)
from .geometry import DomainGeometry, perp
from .mesh import TriMesh

START_HEDGEHOG = "hedgehog"
START_RANDOM = "random"
START_VORTEX = "vortex"


@dataclass
class SolveSchedule:
    eps_start: float
    eps_target: float
    eps_factor: float = 0.65
    max_iters_per_stage: int = 20000
    grad_tol: float = 1e-6
    armijo_c: float = 1e-4
    step_init: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.eps_target > self.eps_start:
            raise ValueError("eps_target must not exceed eps_start")
        if not 0.0 < self.eps_factor < 1.0:
            raise ValueError("eps_factor must lie in (0, 1)")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")

    def eps_chain(self):
        out = []
        e = self.eps_start
        while e > self.eps_target * (1.0 + 1e-12):
            out.append(e)
            e *= self.eps_factor
        out.append(self.eps_target)
        return out


def default_schedule(mesh: TriMesh, eps_target, eps_start=None, seed=0, **overrides) -> SolveSchedule:
    """Schedule with the scale-aware gradient tolerance 1e-6 * sqrt(V)."""
    kw = dict(
        eps_start=eps_start if eps_start is not None else max(eps_target, 0.4),
        eps_target=eps_target,
        grad_tol=1e-6 * np.sqrt(mesh.n_vertices),
        seed=seed,
    )
    kw.update(overrides)
    return SolveSchedule(**kw)


@dataclass
class StageRecord:
    stage: int
    eps: float
    iterations: int
    energy: EnergyBreakdown
    grad_norm: float
    wall_time: float
    converged: bool
    monotone: bool
    rows: list = field(default_factory=list)   # (iter, total, dir, pen, pot, gradnorm)


@dataclass
class SolveTrace:
    stages: list = field(default_factory=list)

    @property
    def final(self) -> StageRecord:
        return self.stages[-1]

    def csv_rows(self):
        for rec in self.stages:
            for it, tot, d, pe, po, gn in rec.rows:
                yield rec.stage, rec.eps, it, tot, d, pe, po, gn


def initial_field(kind, mesh: TriMesh, geom: DomainGeometry, eps):
    """Construct a bc-ready starting field.

    ``"hedgehog"``           tangent of the closest boundary point, vanishing at
                             the fan centre over an eps-scale core;
    ``("random", seed)``     i.i.d. unit vectors;
    ``("vortex", (x, y))``   (x-c)^perp / |x-c| with an eps-scale mollified core.

    The result is tangentially projected on the boundary.
    """
    v = mesh.vertices
    if kind == START_HEDGEHOG:
        s = geom.closest_boundary_arclength(v)
        _, tau = geom.frame(s)
        rad = np.linalg.norm(v - mesh.center, axis=1)
        u = tau * np.minimum(1.0, rad / eps)[:, None]
    elif isinstance(kind, tuple) and kind[0] == START_RANDOM:
        rng = np.random.default_rng(kind[1])
        phi = rng.uniform(0.0, 2.0 * np.pi, v.shape[0])
        u = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    elif isinstance(kind, tuple) and kind[0] == START_VORTEX:
        c = np.asarray(kind[1], dtype=float)
        d = v - c
        r = np.linalg.norm(d, axis=1)
        safe = np.maximum(r, 1e-300)
        u = perp(d) / safe[:, None] * np.minimum(1.0, r / eps)[:, None]
    else:
        raise ValueError(f"unknown initial field kind {kind!r}")
    return project_tangential(u, mesh)


def _stage_minimize(u, p: EnergyParams, sched: SolveSchedule, mesh: TriMesh, stage_idx):
    ops = operators(mesh)
    area, w = ops.area, ops.lumped
    k, inv4e2 = p.k, 1.0 / (4.0 * p.eps**2)
    is_div = p.penalty == PENALTY_DIV

    t0 = time.perf_counter()
    u = apply_bc(u, p, mesh)

    def parts_of(a11, a12, a21, a22, uu):
        q = (a11 + a22) if is_div else (a21 - a12)
        e_dir = 0.5 * float(area @ (a11**2 + a12**2 + a21**2 + a22**2))
        e_pen = 0.5 * k * float(area @ (q * q))
        one_m = 1.0 - (uu * uu).sum(axis=1)
        e_pot = inv4e2 * float(w @ (one_m * one_m))
        return e_dir, e_pen, e_pot

    au = grad_components(u, mesh)
    e_dir, e_pen, e_pot = parts_of(*au, u)

    step = sched.step_init
    monotone = True
    rows = []
    it = 0
    grad_norm = np.inf
    converged = False

    while True:
        a11, a12, a21, a22 = au
        qu = (a11 + a22) if is_div else (a21 - a12)

        g = np.empty_like(u)
        g[:, 0] = ops.DxT @ (area * a11) + ops.DyT @ (area * a12)
        g[:, 1] = ops.DxT @ (area * a21) + ops.DyT @ (area * a22)
        if is_div:
            qa = area * (k * qu)
            g[:, 0] += ops.DxT @ qa
            g[:, 1] += ops.DyT @ qa
        else:
            qa = area * (k * qu)
            g[:, 0] -= ops.DyT @ qa
            g[:, 1] += ops.DxT @ qa
        one_m = 1.0 - (u * u).sum(axis=1)
        g -= (w * one_m * (4.0 * inv4e2))[:, None] * u
        g = project_bc_gradient(g, p, mesh)

        grad_norm = float(np.linalg.norm(g))
        rows.append((it, e_dir + e_pen + e_pot, e_dir, e_pen, e_pot, grad_norm))
        if grad_norm <= sched.grad_tol or it >= sched.max_iters_per_stage:
            converged = grad_norm <= sched.grad_tol
            break

        # exact step polynomials for u - alpha * g
        ag = grad_components(g, mesh)
        qg = (ag[0] + ag[3]) if is_div else (ag[2] - ag[1])
        s_dir = float(area @ (a11 * ag[0] + a12 * ag[1] + a21 * ag[2] + a22 * ag[3]))
        q_dir = float(area @ (ag[0] ** 2 + ag[1] ** 2 + ag[2] ** 2 + ag[3] ** 2))
        s_pen = k * float(area @ (qu * qg))
        q_pen = k * float(area @ (qg * qg))
        c0 = one_m
        c1 = 2.0 * (u * g).sum(axis=1)
        c2 = -(g * g).sum(axis=1)
        W = [
            float(w @ (c0 * c0)),
            float(w @ (2.0 * c0 * c1)),
            float(w @ (c1 * c1 + 2.0 * c0 * c2)),
            float(w @ (2.0 * c1 * c2)),
            float(w @ (c2 * c2)),
        ]

        def stage_energy(al):
            d = e_dir - al * s_dir + 0.5 * al * al * q_dir
            pe = e_pen - al * s_pen + 0.5 * al * al * q_pen
            po = inv4e2 * (W[0] + al * (W[1] + al * (W[2] + al * (W[3] + al * W[4]))))
            return d, pe, po

        e_now = e_dir + e_pen + e_pot
        alpha = 1.3 * step
        accepted = False
        for _ in range(60):
            d, pe, po = stage_energy(alpha)
            if d + pe + po <= e_now - sched.armijo_c * alpha * grad_norm**2:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            raise DivergedError(
                f"line search failed at stage {stage_idx} (eps={p.eps:g}, iter={it})")

        u = apply_bc(u - alpha * g, p, mesh)
        step = alpha
        it += 1
        if it % 50 == 0:
            au = grad_components(u, mesh)
            e_dir, e_pen, e_pot = parts_of(*au, u)
        else:
            au = (a11 - alpha * ag[0], a12 - alpha * ag[1],
                  a21 - alpha * ag[2], a22 - alpha * ag[3])
            new_dir, new_pen, new_pot = stage_energy(alpha)
            if new_dir + new_pen + new_pot > e_now + 1e-12 * (1.0 + abs(e_now)):
                monotone = False
            e_dir, e_pen, e_pot = new_dir, new_pen, new_pot

    rec = StageRecord(
        stage=stage_idx,
        eps=p.eps,
        iterations=it,
        energy=EnergyBreakdown(e_dir, e_pen, e_pot),
        grad_norm=grad_norm,
        wall_time=time.perf_counter() - t0,
        converged=converged,
        monotone=monotone,
        rows=rows,
    )
    return u, rec


def minimize(u0, p: EnergyParams, sched: SolveSchedule, mesh: TriMesh):
    """Minimize at fixed eps; monotone accepted steps, bc enforced after every step."""
    u, rec = _stage_minimize(np.asarray(u0, dtype=float), p, sched, mesh, stage_idx=0)
    trace = SolveTrace(stages=[rec])
    return u, trace


def rings_for_eps(geom: DomainGeometry, eps, cap=96, floor=8):
    """Ring count keeping the max edge near eps/2 (clamped)."""
    return int(np.clip(np.ceil(geom.diameter / eps), floor, cap))


def _stage_mesh(geom, eps, final_mesh, cache):
    rings = min(rings_for_eps(geom, eps, cap=final_mesh.rings), final_mesh.rings)
    if rings == final_mesh.rings:
        return final_mesh
    key = rings
    if key not in cache:
        from .mesh import build_mesh
        cache[key] = build_mesh(geom, rings)
    return cache[key]


def continuation(start_kind, p_final: EnergyParams, sched: SolveSchedule,
                 mesh: TriMesh, geom: DomainGeometry):
    """Anneal eps from sched.eps_start down to p_final.eps with warm starts.

    Intermediate problems run on coarser meshes matched to their eps (edge
    length ~ eps/2); warm starts move between meshes by P1 interpolation.
    The last stage always runs on the supplied mesh at the schedule's
    gradient tolerance.
    """
    if sched.eps_start < p_final.eps * (1.0 - 1e-12):
        raise ValueError("schedule starts below the target eps")
    from .fields import interpolate

    chain = sched.eps_chain()
    cache = geom.__dict__.setdefault("_mesh_cache", {})
    trace = SolveTrace()
    u = None
    prev_mesh = None
    ladder = p_final.dirichlet_values is None   # explicit data is tied to the final mesh
    for i, eps in enumerate(chain):
        stage_mesh = mesh
        if ladder and i < len(chain) - 1:
            stage_mesh = _stage_mesh(geom, eps, mesh, cache)
        p = EnergyParams(eps=eps, k=p_final.k, penalty=p_final.penalty, bc=p_final.bc,
                         dirichlet_values=p_final.dirichlet_values,
                         dirichlet_name=p_final.dirichlet_name)
        if u is None:
            u = initial_field(start_kind, stage_mesh, geom, eps)
        elif stage_mesh is not prev_mesh:
            u = interpolate(prev_mesh, u, stage_mesh.vertices)
        stage_sched = sched if stage_mesh is mesh else SolveSchedule(
            eps_start=sched.eps_start, eps_target=sched.eps_target,
            eps_factor=sched.eps_factor, max_iters_per_stage=sched.max_iters_per_stage,
            grad_tol=sched.grad_tol * np.sqrt(stage_mesh.n_vertices / mesh.n_vertices),
            armijo_c=sched.armijo_c, step_init=sched.step_init, seed=sched.seed)
        u, rec = _stage_minimize(u, p, stage_sched, stage_mesh, stage_idx=i)
        trace.stages.append(rec)
        prev_mesh = stage_mesh
    return u, trace


def multistart(p_final: EnergyParams, sched: SolveSchedule, mesh: TriMesh,
               geom: DomainGeometry, starts):
    """Lowest-energy continuation over a list of starting fields."""
    if not starts:
        raise ValueError("starts must be nonempty")
    best = None
    failures = []
    for kind in starts:
        try:
            u, trace = continuation(kind, p_final, sched, mesh, geom)
        except DivergedError as exc:
            failures.append((kind, exc))
            continue
        total = trace.final.energy.total
        if best is None or total < best[2]:
            best = (u, trace, total, kind)
    if best is None:
        raise AllDivergedError(f"all starts diverged: {failures}")
    return best[0], best[1]
