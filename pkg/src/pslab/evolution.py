"""Semilinear evolution h u_t + (P - mu) u = u^p and its blow-up from tiny data.

The linear part is treated implicitly (one sparse factorization per step-size
level), the nonlinearity explicitly; the implicit matrix I + (dt/h)(P - mu)
is an M-matrix on resolved grids, so nonnegative data stays nonnegative and
the comparison structure of the continuous problem survives discretization.
The step size adapts to the explicit stability constraint
dt ||u||_inf^{p-1} / h <= 0.2 by halving, and the reported blow-up time is
the first crossing of the threshold.

Initial data are compactly supported bumps of amplitude exp(-1/(C h)):
spectrally the linearization is stable (all eigenvalues of -(P - mu) have
real part <= -(lambda_1 - mu) < 0), yet the advection carries the bump along
x + t X while the pseudospectral amplification e^{mu t / h} lifts it to O(1)
in O(1) time, after which the nonlinearity ignites.  The traveling
subsolution w = e^{alpha t / h} w0(x - t X), alpha < mu, certifies the
growth from below as long as the support ride B(x0, 2a) + t X stays inside
the domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GeometryError, PslabError
from .operators import GridOperator


def flow(x, t: float, X) -> np.ndarray:
    """Flow of the advection field: x - t X (constant X)."""
    x = np.asarray(x, dtype=float)
    X = np.atleast_1d(np.asarray(X, dtype=float))
    return x - t * X


# ===================================================================== #
#  bump data
# ===================================================================== #

@dataclass
class BumpSpec:
    center: np.ndarray
    inner_radius: float            # floor radius a; support radius is 2a
    delta: float                   # time window; amplitude floor e^{-delta/2h}
    cap_constant: Optional[float] = None   # sup bound exp(-1/(C h))
    amplitude: Optional[float] = None      # default e * floor
    profile_exponent: float = 1.0

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if self.inner_radius <= 0 or self.delta <= 0:
            raise ValueError("inner radius and delta must be positive")

    def floor(self, h: float) -> float:
        return math.exp(-self.delta / (2.0 * h))

    def cap(self, h: float) -> float:
        if self.cap_constant is None:
            # smallest C consistent with the peak: exp(-1/(Ch)) >= peak
            return self.peak(h)
        return math.exp(-1.0 / (self.cap_constant * h))

    def peak(self, h: float) -> float:
        return self.amplitude if self.amplitude is not None \
            else math.e * self.floor(h)

    def profile(self, pts: np.ndarray, h: float) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.linalg.norm(pts - self.center[None, :], axis=1)
        s = r / (2.0 * self.inner_radius)
        out = np.zeros(len(pts))
        inside = s < 1.0
        si = s[inside]
        out[inside] = self.peak(h) * np.exp(
            -self.profile_exponent * si * si / (1.0 - si * si))
        return out

    def validate_flow(self, domain, X, n_checks: int = 64):
        """The support ride B(x0, 2a) + t X must stay inside for t in [0, 2 delta].

        (The subsolution w0(x - tX) is supported on the translate along +X.)
        """
        X = np.atleast_1d(np.asarray(X, dtype=float))
        d = self.center.shape[0]
        for t in np.linspace(0.0, 2.0 * self.delta, n_checks):
            c = self.center + t * X
            if d == 1:
                lo, hi = c[0] - 2 * self.inner_radius, c[0] + 2 * self.inner_radius
                if lo <= domain.a or hi >= domain.b:
                    raise GeometryError(
                        f"bump support leaves the domain at t = {t:.4f}")
            else:
                th = np.linspace(0, 2 * np.pi, 32, endpoint=False)
                ring = c[None, :] + 2 * self.inner_radius * np.column_stack(
                    [np.cos(th), np.sin(th)])
                if np.any(domain.signed_distance(ring) >= 0.0):
                    raise GeometryError(
                        f"bump support leaves the domain at t = {t:.4f}")


@dataclass
class BumpReport:
    values: np.ndarray
    peak: float
    floor: float
    cap: float
    ineq_constant: float       # smallest C with -Lap w0 <= C w0 - beta inside
    ineq_beta: float


def bump_initial_data(spec: BumpSpec, grid_points: np.ndarray, h: float,
                      domain=None, X=None) -> BumpReport:
    """Sample the bump on the grid and spot-check its defining inequalities."""
    if domain is not None and X is not None:
        spec.validate_flow(domain, X)
    pts = np.atleast_2d(np.asarray(grid_points, dtype=float))
    w0 = spec.profile(pts, h)
    peak = float(w0.max())
    cap = spec.cap(h)
    if peak > cap * (1 + 1e-12):
        raise PslabError(
            f"bump amplitude {peak:.3e} exceeds exp(-1/(C h)) = {cap:.3e}")
    floor = spec.floor(h)
    # floor must hold on the inner ball
    r = np.linalg.norm(pts - spec.center[None, :], axis=1)
    inner = r <= spec.inner_radius
    if inner.any() and w0[inner].min() <= floor:
        raise PslabError("bump fails its amplitude floor on the inner ball")
    # discrete -Lap w0 <= C w0 - beta on the checked interior (s <= 0.8)
    d = pts.shape[1]
    if d == 1:
        x = pts[:, 0]
        order = np.argsort(x)
        xs = x[order]
        ws = w0[order]
        dx = np.median(np.diff(xs))
        lap = np.zeros_like(ws)
        lap[1:-1] = (ws[2:] - 2 * ws[1:-1] + ws[:-2]) / dx ** 2
        sel = (np.abs(xs - spec.center[0]) <= 0.8 * 2 * spec.inner_radius)
        sel[0] = sel[-1] = False
        ratio = -lap[sel] / np.maximum(ws[sel], 1e-300)
        C = float(max(ratio.max(), 0.0)) * 1.1 + 1.0
        beta = float(np.min(C * ws[sel] + lap[sel]))
    else:
        C, beta = np.nan, np.nan   # spot check is one-dimensional here
    return BumpReport(w0, peak, floor, cap, C, beta)


# ===================================================================== #
#  IMEX evolution
# ===================================================================== #

@dataclass
class EvolutionResult:
    times: np.ndarray
    sup_norms: np.ndarray
    blew_up: bool
    t_blowup: Optional[float]
    threshold: float
    snapshots: dict
    dt_initial: float
    dt_min_used: float
    h: float
    mu: float
    p: float


def evolve(op: GridOperator, mu: float, p: float, u0: np.ndarray, dt0: float,
           t_end: float, nonlinear: bool = True, threshold: float = 1e6,
           snapshot_times: Optional[Sequence[float]] = None,
           positivity_tol: float = 1e-12) -> EvolutionResult:
    """IMEX integration of h u_t + (P - mu) u = u^p until t_end or blow-up."""
    h = op.h
    n = op.n
    u = np.asarray(u0, dtype=float).copy()
    if u.shape != (n,):
        raise ValueError(f"initial data must match the {n}-point grid")
    I = sp.identity(n, format="csc")
    A = op.matrix.real.tocsc()
    lus = {}

    def solver(dt):
        if dt not in lus:
            lus[dt] = spla.splu((I + (dt / h) * (A - mu * I)).tocsc())
        return lus[dt]

    want_snaps = sorted(float(s) for s in snapshot_times) \
        if snapshot_times is not None else []
    snaps = {}
    next_snap = 0
    t = 0.0
    times = [0.0]
    sups = [float(np.max(np.abs(u)))]
    dt_min = dt0
    blew = False
    t_blow = None
    max_iters = 10_000_000
    for _ in range(max_iters):
        if t >= t_end or blew:
            break
        sup = float(np.max(u)) if n else 0.0
        # explicit-term stability: dt |u|^{p-1} / h <= 0.2, dt halving only
        dt = dt0
        if nonlinear and sup > 0:
            cap = 0.2 * h / max(sup ** (p - 1.0), 1e-300)
            while dt > cap:
                dt *= 0.5
        dt = min(dt, t_end - t) if t_end - t < dt else dt
        dt_min = min(dt_min, dt)
        rhs = u + (dt / h) * np.maximum(u, 0.0) ** p if nonlinear else u.copy()
        u = solver(dt).solve(rhs)
        if float(u.min()) < -positivity_tol * max(1.0, float(np.max(np.abs(u)))):
            raise PslabError(
                f"positivity lost at t = {t:.5f}: min u = {u.min():.3e}")
        t += dt
        sup = float(np.max(np.abs(u)))
        times.append(t)
        sups.append(sup)
        while next_snap < len(want_snaps) and t >= want_snaps[next_snap] - 1e-12:
            snaps[want_snaps[next_snap]] = u.copy()
            next_snap += 1
        if sup >= threshold:
            blew = True
            t_blow = t
    return EvolutionResult(np.asarray(times), np.asarray(sups), blew, t_blow,
                           threshold, snaps, dt0, dt_min, h, mu, p)


def evolve_scalar(u0: float, mu: float, p: float, h: float, dt0: float,
                  threshold: float = 1e6, t_end: float = 10.0) -> tuple:
    """Space-free IMEX check: h du/dt = mu u + u^p; returns (blow time, N)."""
    u = float(u0)
    t = 0.0
    steps = 0
    while t < t_end:
        dt = min(dt0, 0.2 * h / max(u ** (p - 1.0), 1e-300))
        u = (u + (dt / h) * u ** p) / (1.0 - dt * mu / h)
        t += dt
        steps += 1
        if u >= threshold:
            return t, steps
    return math.inf, steps


def scalar_blowup_time(u0: float, mu: float, p: float, h: float) -> float:
    """Closed form for p = 2: T = (h/mu) log(1 + mu/u0)."""
    if p != 2:
        raise ValueError("closed form recorded for p = 2 only")
    return (h / mu) * math.log1p(mu / u0)


# ===================================================================== #
#  subsolution comparison
# ===================================================================== #

@dataclass
class ComparisonReport:
    ok: bool
    checked_times: list
    worst_margin: float
    worst_time: Optional[float]
    worst_point: Optional[np.ndarray]
    tolerance_at_worst: float


def subsolution_check(result: EvolutionResult, spec: BumpSpec, alpha: float,
                      X, grid_points: np.ndarray,
                      tol_factor: float = 10.0) -> ComparisonReport:
    """Verify u(x, t) >= e^{alpha t/h} w0(x - tX) - tol at the snapshots.

    Valid for t < delta while the solution has not blown up; alpha < mu is
    required for w to be a subsolution.  The tolerance is tol_factor times a
    first-order accumulated-truncation estimate of the scheme error.
    """
    if not 0.0 < alpha < result.mu:
        raise ValueError("need 0 < alpha < mu")
    h = result.h
    pts = np.atleast_2d(np.asarray(grid_points, dtype=float))
    ok = True
    worst = np.inf
    worst_t = None
    worst_pt = None
    worst_tol = 0.0
    checked = []
    for t, u in sorted(result.snapshots.items()):
        if t >= spec.delta:
            continue
        if result.blew_up and result.t_blowup is not None and t >= result.t_blowup:
            continue
        checked.append(t)
        w = math.exp(alpha * t / h) * spec.profile(flow(pts, t, X), h)
        sup = float(np.max(np.abs(u)))
        rate = (result.mu + sup ** (result.p - 1.0)) / h
        tol = tol_factor * 0.5 * t * result.dt_initial * rate ** 2 * h * sup + 1e-12
        margin = u - (w - tol)
        m = float(margin.min())
        if m < worst:
            worst = m
            worst_t = t
            worst_pt = pts[int(np.argmin(margin))]
            worst_tol = tol
        if m < 0:
            ok = False
    return ComparisonReport(ok, checked, worst, worst_t, worst_pt, worst_tol)
