"""Bounded domains, boundary sampling, and field-relative classification.

Domains are intervals (d=1) or planar regions (d=2) bounded by a closed
curve: disk, ellipse, user-supplied parametric curve, or simple polygon.
The boundary carries a parameter t in [0,1) increasing counterclockwise.

Against a constant vector field X, boundary points split into illuminated
(<X,nu> > 0), shadow (<X,nu> < 0) and glancing (|<X,nu>| <= tol) parts,
where nu is the outward unit normal.  ``boundary_frame`` builds the local
orthonormal frame used by the phase construction: nu, a unit tangent, the
normal component nu1 = <X/|X|, nu>, the tangential magnitude X' and the
tangential unit direction e1'.

Curvature is signed positive for convex boundaries (a disk of radius r has
curvature +1/r everywhere).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import GeometryError, InvalidDomainError, InvalidFieldError
from .jets import Jet

GLANCING_TOL = 1e-10
_ON_BOUNDARY_TOL = 1e-10


# ===================================================================== #
#  field
# ===================================================================== #

@dataclass
class FieldSpec:
    """Constant field X for operator/quasimode work, optional drift b for SDEs."""

    X: np.ndarray
    b: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        self.X = np.atleast_1d(np.asarray(self.X, dtype=float))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.X))

    def unit(self) -> np.ndarray:
        n = self.norm
        if n == 0.0:
            raise InvalidFieldError("field X must be nonzero")
        return self.X / n


def _as_field(field_like) -> FieldSpec:
    if isinstance(field_like, FieldSpec):
        return field_like
    return FieldSpec(np.asarray(field_like, dtype=float))


# ===================================================================== #
#  domains
# ===================================================================== #

class Interval:
    """Bounded interval (a, b) in one dimension."""

    dimension = 1

    def __init__(self, a: float, b: float):
        if not a < b:
            raise InvalidDomainError(f"interval needs a < b, got [{a}, {b}]")
        self.a = float(a)
        self.b = float(b)

    def signed_distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.maximum(self.a - x, x - self.b)

    def diameter(self) -> float:
        return self.b - self.a

    def __repr__(self):
        return f"Interval({self.a}, {self.b})"


class _PlanarDomain:
    """Shared machinery for smooth planar domains parametrized on [0,1)."""

    dimension = 2

    # subclasses implement _point/_velocity/_accel on arrays of t
    def boundary_points(self, t) -> np.ndarray:
        return self._point(np.atleast_1d(np.asarray(t, dtype=float)))

    def boundary_normal(self, t) -> np.ndarray:
        v = self._velocity(np.atleast_1d(np.asarray(t, dtype=float)))
        speed = np.linalg.norm(v, axis=1, keepdims=True)
        tang = v / speed
        # CCW orientation: outward normal is the tangent rotated -90 degrees
        return np.column_stack([tang[:, 1], -tang[:, 0]])

    def boundary_tangent(self, t) -> np.ndarray:
        v = self._velocity(np.atleast_1d(np.asarray(t, dtype=float)))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def boundary_curvature(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        v = self._velocity(t)
        a = self._accel(t)
        speed2 = np.sum(v * v, axis=1)
        return (v[:, 0] * a[:, 1] - v[:, 1] * a[:, 0]) / speed2 ** 1.5

    def _polyline(self, n: int = 2048) -> np.ndarray:
        return self.boundary_points(np.arange(n) / n)

    def polygonize(self, n: int = 512) -> "Polygon":
        return Polygon(self._polyline(n))

    def contains(self, pts) -> np.ndarray:
        return self.signed_distance(pts) < 0.0

    def signed_distance(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        poly = self._sd_cache()
        d = _dist_to_polyline(pts, poly)
        inside = _inside_polygon(pts, poly)
        return np.where(inside, -d, d)

    def _sd_cache(self) -> np.ndarray:
        if not hasattr(self, "_sd_poly"):
            self._sd_poly = self._polyline(4096)
        return self._sd_poly

    def boundary_parameter(self, x0) -> float:
        """Parameter of the boundary point closest to x0 (refined)."""
        x0 = np.asarray(x0, dtype=float)
        n = 4096
        ts = np.arange(n) / n
        pts = self.boundary_points(ts)
        k = int(np.argmin(np.sum((pts - x0) ** 2, axis=1)))
        t = ts[k]
        # Newton refinement on f(t) = <p(t)-x0, p'(t)>
        for _ in range(60):
            p = self._point(np.array([t]))[0]
            v = self._velocity(np.array([t]))[0]
            a = self._accel(np.array([t]))[0]
            f = np.dot(p - x0, v)
            fp = np.dot(v, v) + np.dot(p - x0, a)
            if fp == 0.0:
                break
            step = f / fp
            t = (t - step) % 1.0
            if abs(step) < 1e-15:
                break
        return float(t)

    def diameter(self) -> float:
        poly = self._sd_cache()[::16]
        d2 = np.max(np.sum((poly[:, None, :] - poly[None, :, :]) ** 2, axis=2))
        return float(np.sqrt(d2))


class Disk(_PlanarDomain):
    def __init__(self, center, radius: float):
        if radius <= 0:
            raise InvalidDomainError("disk radius must be positive")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def _point(self, t):
        th = 2 * np.pi * t
        return self.center + self.radius * np.column_stack([np.cos(th), np.sin(th)])

    def _velocity(self, t):
        th = 2 * np.pi * t
        return 2 * np.pi * self.radius * np.column_stack([-np.sin(th), np.cos(th)])

    def _accel(self, t):
        th = 2 * np.pi * t
        return -(2 * np.pi) ** 2 * self.radius * np.column_stack([np.cos(th), np.sin(th)])

    def signed_distance(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.linalg.norm(pts - self.center, axis=1) - self.radius

    def boundary_parameter(self, x0):
        v = np.asarray(x0, dtype=float) - self.center
        return float((np.arctan2(v[1], v[0]) / (2 * np.pi)) % 1.0)

    def diameter(self):
        return 2 * self.radius

    def __repr__(self):
        return f"Disk({self.center.tolist()}, {self.radius})"


class Ellipse(_PlanarDomain):
    def __init__(self, center, semi_axes, angle: float = 0.0):
        ax = np.asarray(semi_axes, dtype=float)
        if np.any(ax <= 0):
            raise InvalidDomainError("ellipse semi-axes must be positive")
        self.center = np.asarray(center, dtype=float)
        self.semi_axes = ax
        self.angle = float(angle)
        c, s = np.cos(self.angle), np.sin(self.angle)
        self.rot = np.array([[c, -s], [s, c]])

    def _point(self, t):
        th = 2 * np.pi * t
        loc = np.column_stack([self.semi_axes[0] * np.cos(th),
                               self.semi_axes[1] * np.sin(th)])
        return self.center + loc @ self.rot.T

    def _velocity(self, t):
        th = 2 * np.pi * t
        loc = 2 * np.pi * np.column_stack([-self.semi_axes[0] * np.sin(th),
                                           self.semi_axes[1] * np.cos(th)])
        return loc @ self.rot.T

    def _accel(self, t):
        th = 2 * np.pi * t
        loc = -(2 * np.pi) ** 2 * np.column_stack([self.semi_axes[0] * np.cos(th),
                                                   self.semi_axes[1] * np.sin(th)])
        return loc @ self.rot.T

    def implicit(self, pts) -> np.ndarray:
        """F(x) = (u/a)^2 + (v/b)^2 - 1 in body coordinates (u, v)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        loc = (pts - self.center) @ self.rot
        return (loc[:, 0] / self.semi_axes[0]) ** 2 + \
               (loc[:, 1] / self.semi_axes[1]) ** 2 - 1.0

    def __repr__(self):
        return (f"Ellipse({self.center.tolist()}, {self.semi_axes.tolist()}, "
                f"{self.angle})")


class ParametricCurve(_PlanarDomain):
    """Closed simple CCW curve given by evaluators for p(t), p'(t), p''(t)."""

    def __init__(self, fn, d1, d2):
        self.fn, self.d1, self.d2 = fn, d1, d2
        self._validate()

    def _eval_map(self, f, t):
        t = np.atleast_1d(t)
        out = np.asarray([f(float(ti % 1.0)) for ti in t], dtype=float)
        return out.reshape(len(t), 2)

    def _point(self, t):
        return self._eval_map(self.fn, t)

    def _velocity(self, t):
        return self._eval_map(self.d1, t)

    def _accel(self, t):
        return self._eval_map(self.d2, t)

    def _validate(self):
        for f, name in ((self.fn, "value"), (self.d1, "derivative"),
                        (self.d2, "second derivative")):
            gap = np.max(np.abs(np.asarray(f(0.0)) - np.asarray(f(1.0 - 1e-13))))
            if gap > 1e-9:
                raise InvalidDomainError(f"curve not closed: {name} gap {gap:.2e}")
        poly = self._polyline(1000)
        if _polygon_area(poly) <= 0:
            raise InvalidDomainError("curve must be counterclockwise")
        if _polyline_self_intersects(poly):
            raise InvalidDomainError("curve is not simple (self-intersection)")


class Polygon:
    """Simple counterclockwise polygon; boundary parameter is arclength fraction."""

    dimension = 2

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
            raise InvalidDomainError("polygon needs >= 3 planar vertices")
        if _polygon_area(v) <= 0:
            raise InvalidDomainError("polygon must be counterclockwise")
        if v.shape[0] <= 2048 and _polyline_self_intersects(v):
            raise InvalidDomainError("polygon is not simple")
        self.vertices = v
        e = np.roll(v, -1, axis=0) - v
        self.edge_len = np.linalg.norm(e, axis=1)
        self.cum = np.concatenate([[0.0], np.cumsum(self.edge_len)])
        self.perimeter = self.cum[-1]

    def boundary_points(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float)) % 1.0
        s = t * self.perimeter
        idx = np.clip(np.searchsorted(self.cum, s, side="right") - 1, 0,
                      len(self.edge_len) - 1)
        frac = (s - self.cum[idx]) / self.edge_len[idx]
        v0 = self.vertices[idx]
        v1 = self.vertices[(idx + 1) % len(self.vertices)]
        return v0 + frac[:, None] * (v1 - v0)

    def _edge_of(self, t):
        s = (np.atleast_1d(t) % 1.0) * self.perimeter
        return np.clip(np.searchsorted(self.cum, s, side="right") - 1, 0,
                       len(self.edge_len) - 1)

    def boundary_normal(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float)) % 1.0
        idx = self._edge_of(t)
        s = t * self.perimeter
        at_vertex = np.abs(s - self.cum[idx]) < 1e-12 * max(self.perimeter, 1.0)
        n = self._edge_normals()[idx]
        if np.any(at_vertex):
            # angular bisector of the two adjacent edge normals
            prev = (idx - 1) % len(self.edge_len)
            mix = self._edge_normals()[idx] + self._edge_normals()[prev]
            norms = np.linalg.norm(mix, axis=1, keepdims=True)
            good = norms[:, 0] > 1e-12
            bis = np.where(good[:, None], mix / np.maximum(norms, 1e-300),
                           self._edge_normals()[idx])
            n = np.where(at_vertex[:, None], bis, n)
        return n

    def boundary_tangent(self, t):
        idx = self._edge_of(np.atleast_1d(np.asarray(t, dtype=float)))
        e = np.roll(self.vertices, -1, axis=0) - self.vertices
        return (e / self.edge_len[:, None])[idx]

    def boundary_curvature(self, t):
        return np.zeros(np.atleast_1d(t).shape[0])

    def _edge_normals(self):
        if not hasattr(self, "_enorm"):
            e = np.roll(self.vertices, -1, axis=0) - self.vertices
            tang = e / self.edge_len[:, None]
            self._enorm = np.column_stack([tang[:, 1], -tang[:, 0]])
        return self._enorm

    def signed_distance(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = _dist_to_polyline(pts, self.vertices)
        inside = _inside_polygon(pts, self.vertices)
        return np.where(inside, -d, d)

    def contains(self, pts):
        return self.signed_distance(pts) < 0.0

    def boundary_parameter(self, x0):
        x0 = np.asarray(x0, dtype=float)
        v0 = self.vertices
        v1 = np.roll(v0, -1, axis=0)
        e = v1 - v0
        tt = np.clip(np.einsum("ij,ij->i", x0 - v0, e) / np.maximum(self.edge_len ** 2, 1e-300), 0, 1)
        proj = v0 + tt[:, None] * e
        k = int(np.argmin(np.sum((proj - x0) ** 2, axis=1)))
        s = self.cum[k] + tt[k] * self.edge_len[k]
        return float((s / self.perimeter) % 1.0)

    def polygonize(self, n: int = 512):
        return self

    def diameter(self):
        v = self.vertices
        d2 = np.max(np.sum((v[:, None, :] - v[None, :, :]) ** 2, axis=2))
        return float(np.sqrt(d2))

    def __repr__(self):
        return f"Polygon(<{len(self.vertices)} vertices>)"


# ===================================================================== #
#  low-level planar helpers
# ===================================================================== #

def _polygon_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _inside_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Crossing-number inside test, vectorized over points."""
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x0, y0 = poly[:, 0][None, :], poly[:, 1][None, :]
    x1 = np.roll(poly[:, 0], -1)[None, :]
    y1 = np.roll(poly[:, 1], -1)[None, :]
    cond = (y0 <= y) != (y1 <= y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    crossings = np.sum(cond & (x < xint), axis=1)
    return crossings % 2 == 1


def _dist_to_polyline(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Distance from each point to a closed polyline, chunked to bound memory."""
    v0 = poly
    v1 = np.roll(poly, -1, axis=0)
    e = v1 - v0
    ee = np.maximum(np.sum(e * e, axis=1), 1e-300)
    out = np.empty(pts.shape[0])
    chunk = max(1, int(4e6 / max(len(poly), 1)))
    for lo in range(0, pts.shape[0], chunk):
        p = pts[lo:lo + chunk]
        w = p[:, None, :] - v0[None, :, :]
        t = np.clip(np.einsum("pek,ek->pe", w, e) / ee[None, :], 0.0, 1.0)
        proj = v0[None, :, :] + t[:, :, None] * e[None, :, :]
        d2 = np.sum((p[:, None, :] - proj) ** 2, axis=2)
        out[lo:lo + chunk] = np.sqrt(np.min(d2, axis=1))
    return out


def _segments_properly_intersect(a0, a1, b0, b1) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    d1 = orient(a0, a1, b0)
    d2 = orient(a0, a1, b1)
    d3 = orient(b0, b1, a0)
    d4 = orient(b0, b1, a1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _polyline_self_intersects(poly: np.ndarray) -> bool:
    n = len(poly)
    segs = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_properly_intersect(*segs[i], *segs[j]):
                return True
    return False


def segment_in_domain(domain, p, q, tol: float = 1e-9, n_samples: int = 0) -> bool:
    """True when the closed segment [p, q] stays inside the closed domain."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if n_samples <= 0:
        n_samples = max(8, int(np.linalg.norm(q - p) / (0.002 * max(domain.diameter(), 1e-12))) + 2)
    s = np.linspace(0.0, 1.0, n_samples)
    pts = p[None, :] + s[:, None] * (q - p)[None, :]
    return bool(np.all(domain.signed_distance(pts) <= tol * max(domain.diameter(), 1.0)))


# ===================================================================== #
#  classification and frames
# ===================================================================== #

@dataclass
class BoundarySample:
    point: np.ndarray
    normal: np.ndarray
    tangent: Optional[np.ndarray]
    curvature: float
    classification: str
    t: float


@dataclass
class BoundaryFrame:
    x0: np.ndarray
    normal: np.ndarray
    tangent: Optional[np.ndarray]
    nu1: float
    x_prime: float
    e1_prime: Optional[np.ndarray]
    field: FieldSpec
    t: float
    curvature: float = 0.0

    @property
    def dimension(self) -> int:
        return self.x0.shape[0] if self.x0.ndim else 1


def _classify_value(xdotnu: float, tol: float) -> str:
    if xdotnu > tol:
        return "illuminated"
    if xdotnu < -tol:
        return "shadow"
    return "glancing"


def classify_boundary(domain, field_like, n: int, tol: float = GLANCING_TOL):
    """Sample the boundary and classify each sample against the field.

    Returns samples ordered by boundary parameter.  In one dimension the two
    endpoints are returned (left first).
    """
    field = _as_field(field_like)
    if field.norm == 0.0:
        raise InvalidFieldError("field X must be nonzero for classification")
    if domain.dimension == 1:
        out = []
        for t, x, nu in ((0.0, domain.a, -1.0), (1.0, domain.b, 1.0)):
            val = field.X[0] * nu
            out.append(BoundarySample(np.array([x]), np.array([nu]), None, 0.0,
                                      _classify_value(val, tol), t))
        return out
    if n < 8:
        raise GeometryError("need at least 8 boundary samples in 2D")
    ts = np.arange(n) / n
    pts = domain.boundary_points(ts)
    nus = domain.boundary_normal(ts)
    tgs = domain.boundary_tangent(ts)
    ks = domain.boundary_curvature(ts)
    vals = nus @ field.X
    return [BoundarySample(pts[i], nus[i], tgs[i], float(ks[i]),
                           _classify_value(float(vals[i]), tol), float(ts[i]))
            for i in range(n)]


def boundary_frame(domain, field_like, x0) -> BoundaryFrame:
    """Local frame at a boundary point: normal, tangent, nu1, X', e1'."""
    field = _as_field(field_like)
    xhat = field.unit()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    scale = max(domain.diameter(), 1.0)

    if domain.dimension == 1:
        if abs(x0[0] - domain.a) <= _ON_BOUNDARY_TOL * scale:
            nu, t = -1.0, 0.0
        elif abs(x0[0] - domain.b) <= _ON_BOUNDARY_TOL * scale:
            nu, t = 1.0, 1.0
        else:
            raise GeometryError(f"{x0[0]} is not an endpoint of {domain}")
        nu1 = float(xhat[0] * nu)
        return BoundaryFrame(x0, np.array([nu]), None, nu1, 0.0, None, field, t)

    t = domain.boundary_parameter(x0)
    p = domain.boundary_points([t])[0]
    if np.linalg.norm(p - x0) > _ON_BOUNDARY_TOL * scale:
        raise GeometryError(
            f"point {x0.tolist()} is off the boundary by {np.linalg.norm(p - x0):.3e}")
    nu = domain.boundary_normal([t])[0]
    nu1 = float(np.dot(xhat, nu))
    xp2 = max(0.0, 1.0 - nu1 * nu1)
    x_prime = float(np.sqrt(xp2))
    if x_prime > 1e-12:
        e1p = (xhat - nu1 * nu) / x_prime
        tangent = e1p
    else:
        e1p = None
        tangent = np.array([-nu[1], nu[0]])  # CCW tangent fallback
    kappa = float(domain.boundary_curvature([t])[0])
    return BoundaryFrame(np.asarray(x0, dtype=float), nu, tangent, nu1,
                         x_prime, e1p, field, t, curvature=kappa)


def signed_distance(domain, x) -> np.ndarray | float:
    """Signed Euclidean distance to the boundary, negative inside."""
    if domain.dimension == 1:
        return domain.signed_distance(x)
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    out = domain.signed_distance(arr)
    return float(out[0]) if single else out


# ===================================================================== #
#  boundary graph jets (for the phase construction)
# ===================================================================== #

def boundary_graph_jet(domain, frame: BoundaryFrame, order: int) -> Jet:
    """Taylor coefficients of the boundary as a graph over the frame tangent.

    Near x0 the boundary is v1 = g(v2) in frame coordinates (v1 normal,
    v2 along the frame tangent), with g(0) = g'(0) = 0 and g''(0) = -kappa.
    Returns g as a 1-variable jet of the requested order.
    """
    if domain.dimension == 1:
        return Jet(np.zeros(1), order, 1)
    nu, tau = frame.normal, frame.tangent
    if isinstance(domain, Disk):
        # g(t) = sqrt(r^2 - t^2) - r, expanded via the binomial series
        r = domain.radius
        g = np.zeros(order + 1, dtype=complex)
        coef = 0.5
        fac = 1.0
        for k in range(1, order // 2 + 1):
            fac *= (coef - (k - 1)) / k
            g[2 * k] = r * fac * (-1.0) ** k / r ** (2 * k)
        return Jet(g, order, 1)
    if isinstance(domain, Ellipse):
        return _implicit_graph_jet(
            lambda pts: domain.implicit(pts), frame.x0, nu, tau, order)
    if isinstance(domain, Polygon):
        # valid only in the interior of an edge; the graph is flat there
        return Jet(np.zeros(order + 1), order, 1)
    if isinstance(domain, ParametricCurve):
        if order <= 2:
            g = np.zeros(order + 1, dtype=complex)
            if order == 2:
                g[2] = -frame.curvature / 2.0
            return Jet(g, order, 1)
        raise GeometryError(
            "parametric curves expose derivatives only to order 2; "
            "boundary jets of order > 2 need a Disk/Ellipse domain")
    raise GeometryError(f"no boundary jet rule for {type(domain).__name__}")


def _implicit_graph_jet(implicit, x0, nu, tau, order) -> Jet:
    """Solve F(x0 + t*tau + g*nu) = 0 for the series g(t) by fixed point.

    F is sampled exactly through second order (it is quadratic for conics);
    the recursion g <- g - F(t, g)/F_g converges one coefficient per sweep.
    """
    # quadratic Taylor of F in (t, g) via exact evaluations (conic: exact)
    def F(tv, gv):
        pt = x0[None, :] + np.outer(np.atleast_1d(tv), tau) + np.outer(np.atleast_1d(gv), nu)
        return implicit(pt)

    # conic level sets are exactly quadratic, so a large step keeps the
    # central differences exact while avoiding cancellation
    e = 0.1
    f00 = float(F(0, 0)[0])
    ft = float((F(e, 0) - F(-e, 0))[0] / (2 * e))
    fg = float((F(0, e) - F(0, -e))[0] / (2 * e))
    ftt = float((F(e, 0) - 2 * F(0, 0) + F(-e, 0))[0] / e ** 2)
    fgg = float((F(0, e) - 2 * F(0, 0) + F(0, -e))[0] / e ** 2)
    ftg = float((F(e, e) - F(e, -e) - F(-e, e) + F(-e, -e))[0] / (4 * e ** 2))
    if abs(fg) < 1e-12:
        raise GeometryError("normal direction tangent to the level set")
    t = Jet.variable(0, order, 1)
    g = Jet.zero(order, 1)
    for _ in range(order + 1):
        val = (f00 + ft * t + fg * g + 0.5 * ftt * t.mul(t)
               + ftg * t.mul(g) + 0.5 * fgg * g.mul(g))
        g = g - (1.0 / fg) * val
    return g
