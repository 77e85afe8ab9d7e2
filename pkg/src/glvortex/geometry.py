"""Smooth star-shaped planar domains with arclength and tubular-coordinate machinery.

Every supported shape is a polar graph about the origin: the boundary curve is
theta -> rho(theta) * (cos theta, sin theta) with rho smooth, positive and
2*pi-periodic.  Arclength parametrization is realised by a cumulative
quadrature table polished with Newton iteration, so tangent, normal and
curvature are always evaluated analytically in theta.

Frame conventions (perp(v) = (-v2, v1)):
    tau(s) = gamma'(s),    n(s) = -perp(tau)  (outward),
    n'(s) = kappa * tau,   tau'(s) = -kappa * n,
so kappa = +1 on the unit circle.  Tubular coordinates (y1, y2) map to
gamma(y1) - y2 * n(y1); y2 > 0 lies inside the domain.
"""

from __future__ import annotations

import numpy as np

from .errors import BadGeometryError, OutOfTubeError

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(10)

_N_TABLE = 2048
_N_SEEDS = 256

DEFAULT_PEANUT_PINCH = 0.45


def perp(v):
    """Rotate 2-vectors by +90 degrees: (x, y) -> (-y, x)."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


class DomainGeometry:
    """A smooth, simply connected, star-shaped domain given as a polar graph.

    Construct via the factory functions :func:`unit_disk`, :func:`ellipse`,
    :func:`peanut`, :func:`polar_graph` or :func:`parse_shape`.
    """

    def __init__(self, kind, rho_funcs, shape_spec, tubular_width=None):
        self.kind = kind
        self.shape_spec = shape_spec
        self._rho, self._drho, self._d2rho = rho_funcs

        theta = np.linspace(0.0, 2.0 * np.pi, _N_TABLE + 1)
        if np.min(self._rho(theta)) <= 0.0:
            raise BadGeometryError(f"radius function not positive for shape {shape_spec!r}")

        self._theta_nodes = theta
        self._dtheta = 2.0 * np.pi / _N_TABLE
        seg = self._segment_arclengths(theta[:-1], theta[1:])
        self._cum = np.concatenate(([0.0], np.cumsum(seg)))
        self.arclength_total = float(self._cum[-1])

        self._init_region_quantities()
        kmax = self.curvature_max
        width = 0.4 / kmax if kmax > 0 else 0.3 * self.inradius
        width = min(width, 0.3 * self.inradius)
        self.tubular_width = float(tubular_width) if tubular_width is not None else width
        if self.tubular_width * kmax >= 1.0:
            raise BadGeometryError("tubular width too large for curvature")

        seed_s = np.linspace(0.0, self.arclength_total, _N_SEEDS, endpoint=False)
        self._seed_s = seed_s
        self._seed_pts = self.boundary_point(seed_s)

    # -- polar-curve primitives (all vectorized in theta) --

    def _speed(self, theta):
        r = self._rho(theta)
        dr = self._drho(theta)
        return np.sqrt(r * r + dr * dr)

    def _curve(self, theta):
        r = self._rho(theta)
        return np.stack((r * np.cos(theta), r * np.sin(theta)), axis=-1)

    def _curve_tangent(self, theta):
        r = self._rho(theta)
        dr = self._drho(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack((dr * c - r * s, dr * s + r * c), axis=-1)

    def _curvature_theta(self, theta):
        r = self._rho(theta)
        dr = self._drho(theta)
        d2r = self._d2rho(theta)
        num = r * r + 2.0 * dr * dr - r * d2r
        return num / (r * r + dr * dr) ** 1.5

    def _segment_arclengths(self, a, b):
        t = 0.5 * (_GAUSS_X + 1.0)
        nodes = a[None, :] + (b - a)[None, :] * t[:, None]
        vals = self._speed(nodes)
        return (b - a) * 0.5 * np.einsum("g,gn->n", _GAUSS_W, vals)

    def _init_region_quantities(self):
        theta = self._theta_nodes[:-1]
        t = 0.5 * (_GAUSS_X + 1.0)
        nodes = (theta[None, :] + self._dtheta * t[:, None]).ravel()
        w = np.tile(_GAUSS_W * self._dtheta * 0.5, theta.size)
        r = self._rho(nodes)
        area = 0.5 * np.sum(w * r * r)
        cx = np.sum(w * r**3 * np.cos(nodes)) / (3.0 * area)
        cy = np.sum(w * r**3 * np.sin(nodes)) / (3.0 * area)
        self.area = float(area)
        self.centroid = np.array([cx, cy])

        kap = self._curvature_theta(self._theta_nodes)
        self.curvature_max = float(np.max(np.abs(kap)))

        rho_t = self._rho(self._theta_nodes)
        self.diameter = float(np.max(rho_t[: _N_TABLE // 2]
                                     + self._rho(self._theta_nodes[: _N_TABLE // 2] + np.pi)))

        # star-shapedness about the centroid: angle about c increases along the curve
        g = self._curve(self._theta_nodes)
        gt = self._curve_tangent(self._theta_nodes)
        rel = g - self.centroid
        cross = rel[:, 0] * gt[:, 1] - rel[:, 1] * gt[:, 0]
        self.star_shaped = bool(np.all(cross > 0.0))

        # approximate inradius: best distance-to-boundary over a candidate grid
        dirs = self._curve(np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False)) - self.centroid
        fracs = np.linspace(0.0, 0.85, 9)
        cand = self.centroid + fracs[:, None, None] * dirs[None, :, :]
        cand = cand.reshape(-1, 2)
        bd = self._curve(self._theta_nodes[:-1])
        d = np.sqrt(((cand[:, None, :] - bd[None, :, :]) ** 2).sum(-1)).min(axis=1)
        self.inradius = float(d.max())

    # -- arclength parametrization --

    def _theta_of_s(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.arclength_total)
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, _N_TABLE - 1)
        th_lo = self._theta_nodes[idx]
        seg = self._cum[idx + 1] - self._cum[idx]
        th = th_lo + self._dtheta * (s - self._cum[idx]) / seg
        t = 0.5 * (_GAUSS_X + 1.0)
        for _ in range(6):
            nodes = th_lo[None, ...] + (th - th_lo)[None, ...] * t.reshape((-1,) + (1,) * th.ndim)
            part = (th - th_lo) * 0.5 * np.einsum("g,g...->...", _GAUSS_W, self._speed(nodes))
            f = self._cum[idx] + part - s
            th = th - f / self._speed(th)
        return th

    def arclength_of_theta(self, theta):
        """Arclength s corresponding to polar angle theta (wrapped to [0, 2*pi))."""
        theta = np.mod(np.asarray(theta, dtype=float), 2.0 * np.pi)
        idx = np.clip((theta / self._dtheta).astype(int), 0, _N_TABLE - 1)
        th_lo = self._theta_nodes[idx]
        t = 0.5 * (_GAUSS_X + 1.0)
        nodes = th_lo[None, ...] + (theta - th_lo)[None, ...] * t.reshape((-1,) + (1,) * theta.ndim)
        part = (theta - th_lo) * 0.5 * np.einsum("g,g...->...", _GAUSS_W, self._speed(nodes))
        return self._cum[idx] + part

    # -- spec operations --

    def boundary_point(self, s):
        """Point gamma(s) on the boundary; periodic in s with period L."""
        return self._curve(self._theta_of_s(s))

    def frame(self, s):
        """Outward normal and unit tangent (n, tau) at arclength s."""
        th = self._theta_of_s(s)
        g = self._curve_tangent(th)
        tau = g / np.linalg.norm(g, axis=-1, keepdims=True)
        return -perp(tau), tau

    def curvature(self, s):
        """Signed curvature at arclength s (= +1 everywhere on the unit circle)."""
        return self._curvature_theta(self._theta_of_s(s))

    def tubular_to_cartesian(self, p):
        """Map tubular coordinates (y1, y2) to gamma(y1) - y2*n(y1)."""
        y1, y2 = p
        if np.any(np.abs(y2) > self.tubular_width * (1 + 1e-12)):
            raise OutOfTubeError(f"|y2|={np.max(np.abs(y2)):.4g} exceeds tube half-width")
        n, _ = self.frame(y1)
        return self.boundary_point(y1) - np.asarray(y2)[..., None] * n

    def closest_boundary_arclength(self, points, newton_tol=1e-12, max_iter=50):
        """Arclength of the boundary point closest to each query point.

        Seeded from a dense boundary sample; reliable inside the tube and a
        best-effort projection further away (used by field initialisation).
        """
        P = np.atleast_2d(np.asarray(points, dtype=float))
        d2 = ((P[:, None, :] - self._seed_pts[None, :, :]) ** 2).sum(-1)
        s = self._seed_s[np.argmin(d2, axis=1)].copy()
        for _ in range(max_iter):
            gam = self.boundary_point(s)
            n, tau = self.frame(s)
            rel = P - gam
            g = np.einsum("ij,ij->i", rel, tau)
            if np.all(np.abs(g) < newton_tol):
                break
            dg = -1.0 - self.curvature(s) * np.einsum("ij,ij->i", rel, n)
            safe = np.abs(dg) > 0.05
            s = np.where(safe, s - g / np.where(safe, dg, 1.0), s)
        s = np.mod(s, self.arclength_total)
        return s if np.asarray(points).ndim > 1 else s[0]

    def cartesian_to_tubular(self, x):
        """Invert the tubular map; raises OutOfTubeError outside the tube."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        s = np.atleast_1d(self.closest_boundary_arclength(X))
        gam = self.boundary_point(s)
        n, tau = self.frame(s)
        rel = X - gam
        g = np.abs(np.einsum("ij,ij->i", rel, tau))
        y2 = np.einsum("ij,ij->i", gam - X, n)
        if np.any(np.abs(y2) > self.tubular_width * (1 + 1e-9)) or np.any(g > 1e-8):
            raise OutOfTubeError("point outside the tubular neighbourhood")
        if np.asarray(x).ndim > 1:
            return s, y2
        return float(s[0]), float(y2[0])

    def reflect(self, x):
        """Reflect across the boundary: (y1, y2) -> (y1, -y2) in tube coordinates."""
        single = np.asarray(x).ndim == 1
        X = np.atleast_2d(np.asarray(x, dtype=float))
        s, y2 = self.cartesian_to_tubular(X)
        out = self.tubular_to_cartesian((s, -y2))
        return out[0] if single else out

    def reflection_matrix(self, x):
        """A(x) = I - 2 n n^T built from the normal at the closest boundary point."""
        single = np.asarray(x).ndim == 1
        X = np.atleast_2d(np.asarray(x, dtype=float))
        s, _ = self.cartesian_to_tubular(X)
        n, _ = self.frame(s)
        A = np.eye(2)[None, :, :] - 2.0 * n[:, :, None] * n[:, None, :]
        return A[0] if single else A

    def contains(self, x):
        """True iff x lies in the open domain (polar-radius comparison)."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.hypot(X[:, 0], X[:, 1])
        theta = np.arctan2(X[:, 1], X[:, 0])
        inside = r < self._rho(theta)
        return inside if np.asarray(x).ndim > 1 else bool(inside[0])

    def distance_to_boundary(self, points):
        """Unsigned distance to the boundary (via the closest-point projection)."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        s = np.atleast_1d(self.closest_boundary_arclength(P))
        d = np.linalg.norm(P - self.boundary_point(s), axis=-1)
        return d if np.asarray(points).ndim > 1 else float(d[0])


def unit_disk():
    """Unit circle with its canonical parametrization gamma(s) = (cos s, sin s)."""
    one = lambda th: np.ones_like(np.asarray(th, dtype=float))
    zero = lambda th: np.zeros_like(np.asarray(th, dtype=float))
    return DomainGeometry("disk", (one, zero, zero), "disk")


def ellipse(a, b):
    """Ellipse with semi-axes a, b > 0."""
    if a <= 0 or b <= 0:
        raise BadGeometryError("ellipse semi-axes must be positive")
    a2, b2 = a * a, b * b

    def D(th):
        return b2 * np.cos(th) ** 2 + a2 * np.sin(th) ** 2

    def rho(th):
        return a * b / np.sqrt(D(th))

    def drho(th):
        dD = (a2 - b2) * np.sin(2.0 * th)
        return -a * b * dD / (2.0 * D(th) ** 1.5)

    def d2rho(th):
        Dv = D(th)
        dD = (a2 - b2) * np.sin(2.0 * th)
        d2D = 2.0 * (a2 - b2) * np.cos(2.0 * th)
        return a * b * (3.0 * dD * dD / (4.0 * Dv**2.5) - d2D / (2.0 * Dv**1.5))

    return DomainGeometry("ellipse", (rho, drho, d2rho), f"ellipse:{a:g},{b:g}")


def peanut_b_from_pinch(pinch):
    """Cassini parameter b for a requested neck-to-lobe width ratio in (0, 1)."""
    if not 0.0 < pinch < 1.0:
        raise BadGeometryError("peanut pinch must lie in (0, 1)")
    return float(np.sqrt((1.0 + pinch * pinch) / (1.0 - pinch * pinch)))


def peanut(pinch=None):
    """Two-lobed Cassini oval, scaled to the unit disk's diameter (lobe tips at x = +-1).

    rho(theta)^2 = scale^2 * (cos 2theta + sqrt(b^4 - sin^2 2theta)); the pinch
    parameter is the neck/lobe half-width ratio (default 0.45).
    """
    if pinch is None:
        pinch = DEFAULT_PEANUT_PINCH
        spec = "peanut"
    else:
        spec = f"peanut:{pinch:g}"
    b = peanut_b_from_pinch(pinch)
    b4 = b**4
    scale2 = 1.0 / (1.0 + b * b)  # rho(0) = 1: same diameter as the unit disk

    def P(th):
        return np.cos(2.0 * th) + np.sqrt(b4 - np.sin(2.0 * th) ** 2)

    def dP(th):
        Q = np.sqrt(b4 - np.sin(2.0 * th) ** 2)
        return -2.0 * np.sin(2.0 * th) - np.sin(4.0 * th) / Q

    def d2P(th):
        Q = np.sqrt(b4 - np.sin(2.0 * th) ** 2)
        return (-4.0 * np.cos(2.0 * th) - 4.0 * np.cos(4.0 * th) / Q
                - np.sin(4.0 * th) ** 2 / Q**3)

    def rho(th):
        return np.sqrt(scale2 * P(th))

    def drho(th):
        return scale2 * dP(th) / (2.0 * rho(th))

    def d2rho(th):
        r = rho(th)
        return scale2 * d2P(th) / (2.0 * r) - (scale2 * dP(th)) ** 2 / (4.0 * r**3)

    return DomainGeometry("peanut", (rho, drho, d2rho), spec)


def polar_graph(coeffs):
    """Polar graph rho(theta) = sum_m c_m cos(m*theta) from cosine coefficients."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise BadGeometryError("polar shape needs at least one cosine coefficient")
    m = np.arange(c.size, dtype=float)

    def rho(th):
        th = np.asarray(th, dtype=float)
        return np.einsum("m,m...->...", c, np.cos(np.multiply.outer(m, th)))

    def drho(th):
        th = np.asarray(th, dtype=float)
        return -np.einsum("m,m...->...", c * m, np.sin(np.multiply.outer(m, th)))

    def d2rho(th):
        th = np.asarray(th, dtype=float)
        return -np.einsum("m,m...->...", c * m * m, np.cos(np.multiply.outer(m, th)))

    spec = "polar:" + ",".join(f"{v:g}" for v in c)
    return DomainGeometry("polar", (rho, drho, d2rho), spec)


def parse_shape(text):
    """Build a geometry from a run-config shape string.

    Accepted forms: ``disk``, ``ellipse:a,b``, ``peanut``, ``peanut:pinch``,
    ``polar:c0,c1,...``.
    """
    text = text.strip()
    name, _, arg = text.partition(":")
    name = name.lower()
    try:
        if name == "disk" and not arg:
            return unit_disk()
        if name == "ellipse":
            a, b = (float(v) for v in arg.split(","))
            return ellipse(a, b)
        if name == "peanut":
            return peanut(float(arg)) if arg else peanut()
        if name == "polar":
            return polar_graph([float(v) for v in arg.split(",")])
    except (ValueError, TypeError) as exc:
        raise BadGeometryError(f"cannot parse shape {text!r}: {exc}") from exc
    raise BadGeometryError(f"unknown shape {text!r}")
