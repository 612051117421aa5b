"""Boundary WKB quasimodes for P = -h^2*Laplace + h<X, grad> with Dirichlet data.

The construction produces u = chi * (a e^{i phi_1/h} - b e^{i phi_2/h}) near an
illuminated boundary point x0.  In the local frame (v1 normal, v2 tangential,
interior v1 < 0) both phases share the boundary trace

    phi_0(t) = |X| (lambda t + (1/2) M t^2),    M = i*eps,  eps > 0,

and their normal covector components (alpha_i + i beta_i) are the two roots
obtained from

    c^4 + (Re z - lambda^2 - nu1^2/4) c^2 - (Im z - X' lambda)^2 / 4 = 0,
    beta = c - nu1/2,   alpha (2 beta + nu1) = Im z - X' lambda,

in the unit-field reduction (solve at z/|X|^2, scale covectors and phases by
|X|).  Both beta_i < 0 exactly when (Im z)^2 < Re z, which makes the ansatz
decay into the domain and localize on the boundary.

Higher phase/amplitude jets come from matching Taylor coefficients of the
eikonal p_z(x, d phi) and of the transport equation

    -2i <d phi, d psi_n> - i (Laplace phi) psi_n + <X, d psi_n> = Laplace psi_{n-1},

order by order in total degree.  The first-order coefficient of the transport
operator is -i(2 xi_1 + i X_nu) along the normal, which is invertible away
from the excluded value z = <X,nu>^2/4.

Residuals are evaluated from the exact differentiation identity

    P_z(a e^{i phi/h}) = e^{i phi/h} [ a p_z(d phi)
        + h(-2i<d phi, d a> - i (Lap phi) a + <X, d a>) - h^2 Lap a ],

so no numerical differentiation enters the residual path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    CutoffError,
    ExceptionalPointError,
    GeometryError,
    NoQuasimodeError,
    OutOfChartError,
    ResolutionError,
    SeedRestrictionError,
    WrongSideError,
)
from .geometry import BoundaryFrame, Disk, Ellipse, boundary_frame, boundary_graph_jet
from .jets import Jet

_SEED_TOL = 1e-10


# ===================================================================== #
#  spectral point
# ===================================================================== #

@dataclass
class SpectralPoint:
    z: complex
    h: float
    X: np.ndarray

    def __post_init__(self):
        self.z = complex(self.z)
        self.h = float(self.h)
        self.X = np.atleast_1d(np.asarray(self.X, dtype=float))
        if self.h <= 0:
            raise ValueError("h must be positive")
        if np.linalg.norm(self.X) == 0:
            raise ValueError("field X must be nonzero")

    @property
    def field_norm(self) -> float:
        return float(np.linalg.norm(self.X))

    @property
    def in_region(self) -> bool:
        """Inside the closed instability region Re z >= (Im z)^2 / |X|^2."""
        return self.z.real >= self.z.imag ** 2 / self.field_norm ** 2

    @property
    def region_margin(self) -> float:
        return self.z.real - self.z.imag ** 2 / self.field_norm ** 2


# ===================================================================== #
#  phase seed
# ===================================================================== #

@dataclass
class PhaseSeed:
    frame: BoundaryFrame
    sp: SpectralPoint
    lam: float                 # unit-field tangential momentum
    c: float                   # positive root, 0 < c < nu1/2
    alpha: np.ndarray          # (2,) real parts of the normal momenta
    beta: np.ndarray           # (2,) imaginary parts, both negative
    tangential_hessian: complex  # M = i*eps on the tangent space
    eps: float
    a_param: float
    exceptional_margin: float
    exceptional: bool = False

    @property
    def nu1(self) -> float:
        return self.frame.nu1

    @property
    def x_prime(self) -> float:
        return self.frame.x_prime

    def covector_frame(self, root: int) -> np.ndarray:
        """d phi(x0) in frame coordinates (normal, tangential), field-scaled."""
        s = self.sp.field_norm
        xi_n = s * (self.alpha[root - 1] + 1j * self.beta[root - 1])
        if self.frame.dimension == 1:
            return np.array([xi_n])
        return np.array([xi_n, s * self.lam])

    def covector(self, root: int) -> np.ndarray:
        """d phi(x0) as an ambient complex covector."""
        w = self.covector_frame(root)
        if self.frame.dimension == 1:
            return w * self.frame.normal
        return w[0] * self.frame.normal + w[1] * self.frame.tangent

    def seed_residual(self, root: int) -> float:
        """|p_z(covector)| for the unscaled operator; ~1e-16 by construction."""
        xi = self.covector(root)
        X = self.sp.X.astype(complex)
        pz = np.dot(xi, xi) + 1j * np.dot(X, xi) - self.sp.z
        return abs(pz)


def phase_seed(frame: BoundaryFrame, sp: SpectralPoint,
               a_param: float = 0.5, eps: float = 1.0) -> PhaseSeed:
    """Solve the boundary covector problem at x0 for both normal momenta.

    Preconditions: z strictly inside the region, z distinct from the
    excluded value <X(x0), nu(x0)>^2 / 4, x0 illuminated, and in d=1
    additionally Im z != 0 or Re z < <X,nu>^2/4.
    """
    if not -1.0 < a_param < 1.0:
        raise ValueError("a_param must lie in (-1, 1)")
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = frame.dimension
    s2 = sp.field_norm ** 2
    zh = sp.z / s2                      # unit-field reduction
    nu1 = frame.nu1
    xp = frame.x_prime

    if nu1 <= 1e-10:
        raise WrongSideError(
            f"x0 must be illuminated; <X, nu>/|X| = {nu1:.3e}")
    margin = zh.real - zh.imag ** 2
    if margin <= 0:
        kind = "on the boundary parabola" if abs(margin) <= 1e-12 * max(1.0, abs(zh)) \
            else "outside the closed region"
        raise NoQuasimodeError(
            f"z = {sp.z} is {kind} Re z = (Im z)^2/|X|^2: no quasimodes there")
    exc = nu1 ** 2 / 4.0
    exc_margin = abs(zh - exc)
    if exc_margin <= 1e-12 * max(1.0, abs(zh)):
        raise ExceptionalPointError(
            f"z/|X|^2 = {zh} equals the excluded value <X,nu>^2/(4|X|^2) = {exc}")
    if d == 1 and zh.imag == 0.0 and zh.real >= exc:
        raise SeedRestrictionError(
            "in d=1 the construction needs Im z != 0 or Re z < <X,nu>^2/4")

    # tangential momentum selection
    if zh.imag != 0.0:
        lam = zh.imag * xp
    elif nu1 < 1.0 - 1e-12:
        lam = nu1 * math.sqrt(zh.real) * a_param
    elif zh.real < 0.25:
        lam = 0.0
    else:
        lam = math.sqrt(zh.real - 0.125)

    q = zh.real - lam ** 2 - nu1 ** 2 / 4.0
    r4 = (zh.imag - xp * lam) ** 2 / 4.0
    c2 = 0.5 * (-q + math.sqrt(q * q + 4.0 * r4))
    c = math.sqrt(max(c2, 0.0))
    if not 0.0 < c < nu1 / 2.0:
        raise NoQuasimodeError(
            f"degenerate normal momentum (c = {c:.3e}); z too close to the "
            "region boundary or a_param = 0 with real z")
    roots_c = np.array([c, -c])
    beta = roots_c - nu1 / 2.0
    num = zh.imag - xp * lam
    alpha = np.where(np.abs(roots_c) > 0, num / (2.0 * roots_c), 0.0)

    seed = PhaseSeed(frame, sp, lam, c, alpha, beta, 1j * eps, eps, a_param,
                     exc_margin)
    for root in (1, 2):
        res = seed.seed_residual(root)
        if res > _SEED_TOL * max(1.0, abs(sp.z)):
            raise ExceptionalPointError(
                f"seed equations inconsistent (residual {res:.2e}); "
                "z is too close to the excluded value")
    return seed


# ===================================================================== #
#  phase and amplitude jets
# ===================================================================== #

@dataclass
class PhaseJet:
    jet: Jet
    order: int
    root: int
    seed: PhaseSeed
    boundary_graph: Jet
    X_frame: np.ndarray          # field in frame coordinates
    z: complex
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.jet.dim

    def gradient(self) -> list[Jet]:
        if "grad" not in self._cache:
            self._cache["grad"] = [self.jet.diff(ax) for ax in range(self.dim)]
        return self._cache["grad"]

    def laplacian(self) -> Jet:
        if "lap" not in self._cache:
            self._cache["lap"] = sum(
                (self.jet.diff(ax).diff(ax) for ax in range(self.dim)),
                Jet.zero(self.order, self.dim))
        return self._cache["lap"]

    def eikonal_residual_jet(self) -> Jet:
        """Exact p_z(d phi) without truncation (degree up to 2*order-2)."""
        if "eik" not in self._cache:
            grads = [Jet(g.coeffs, 2 * self.order, self.dim) for g in self.gradient()]
            acc = Jet.constant(-self.z, 2 * self.order, self.dim)
            for ax, g in enumerate(grads):
                acc = acc + g.mul_full(g) + (1j * self.X_frame[ax]) * g
            self._cache["eik"] = acc
        return self._cache["eik"]


@dataclass
class AmplitudeJet:
    jet: Jet
    n: int
    root: int


def _graph_coefficient(phi: Jet, g: Jet, degree: int) -> complex:
    """Coefficient of t^degree in phi(g(t), t)."""
    return complex(phi.compose_graph(g).coeffs[degree])


def _phi0_coeffs(seed: PhaseSeed, order: int) -> np.ndarray:
    """Boundary trace coefficients |X| (lambda t + M t^2 / 2); higher jets zero."""
    c = np.zeros(order + 1, dtype=complex)
    s = seed.sp.field_norm
    if order >= 1:
        c[1] = s * seed.lam
    if order >= 2:
        c[2] = s * seed.tangential_hessian / 2.0
    return c


def solve_eikonal_jet(seed: PhaseSeed, boundary_graph: Jet, order: int
                      ) -> tuple[PhaseJet, PhaseJet]:
    """Jets of both phases with eikonal coefficients zero through degree order-1."""
    if order < 2:
        raise ValueError("jet order must be at least 2")
    frame = seed.frame
    d = frame.dimension
    s = seed.sp.field_norm
    z = seed.sp.z
    if d == 1:
        X_frame = np.array([float(np.dot(seed.sp.X, frame.normal))])
    else:
        X_frame = np.array([float(np.dot(seed.sp.X, frame.normal)),
                            float(np.dot(seed.sp.X, frame.tangent))])

    out = []
    for root in (1, 2):
        xi = seed.covector_frame(root)
        phi = _solve_phase_recursion(xi, X_frame, z, boundary_graph,
                                     _phi0_coeffs(seed, order), order, d)
        pj = PhaseJet(phi, order, root, seed, boundary_graph, X_frame, z)
        res = pj.eikonal_residual_jet().max_coeff_through(order - 1)
        if res > 1e-10 * max(1.0, abs(z)):
            raise ExceptionalPointError(
                f"eikonal recursion singular (residual {res:.2e}); z is at or "
                "near the excluded value <X,nu>^2/4")
        out.append(pj)
    return out[0], out[1]


def _eikonal_value(phi: Jet, X_frame, z, order) -> Jet:
    acc = Jet.constant(-z, order, phi.dim)
    for ax in range(phi.dim):
        g = phi.diff(ax)
        acc = acc + g.mul(g) + (1j * X_frame[ax]) * g
    return acc


def _solve_phase_recursion(xi, X_frame, z, graph, phi0, order, d) -> Jet:
    A = 2.0 * xi[0] + 1j * X_frame[0]
    if abs(A) < 1e-12:
        raise ExceptionalPointError("normal transport coefficient vanishes")
    phi = Jet.zero(order, d)
    if d == 1:
        phi.coeffs[1] = xi[0]
        for r in range(1, order):
            e = _eikonal_value(phi, X_frame, z, order)
            phi.coeffs[r + 1] = -e.coeffs[r] / (A * (r + 1))
        return phi

    B = 2.0 * xi[1] + 1j * X_frame[1]
    phi.coeffs[1, 0] = xi[0]
    phi.coeffs[0, 1] = xi[1]
    for r in range(1, order):
        snew = r + 1
        # boundary condition pins the pure-tangential coefficient first
        phi.coeffs[0, snew] = 0.0
        restr = _graph_coefficient(phi, graph, snew)
        phi.coeffs[0, snew] = phi0[snew] - restr
        # back-substitute the normal chain of the new slab
        e = _eikonal_value(phi, X_frame, z, order)
        for m in range(0, snew):
            n = r - m
            val = e.coeffs[m, n]
            if m >= 1:
                val = val + B * (n + 1) * phi.coeffs[m, n + 1]
            phi.coeffs[m + 1, n] = -val / (A * (m + 1))
    return phi


def solve_transport_jet(phase: PhaseJet, n_max: int, order: int
                        ) -> list[AmplitudeJet]:
    """Amplitude jets psi_0..psi_{n_max}; residual vanishes through degree order-2."""
    d = phase.dim
    amp_order = order - 1
    xi = np.array([complex(phase.jet.coeffs[(1,) + (0,) * (d - 1)]),
                   complex(phase.jet.coeffs[0, 1]) if d == 2 else 0.0])[:d]
    A = -2j * xi[0] + phase.X_frame[0]
    if abs(A) < 1e-12:
        raise ExceptionalPointError("transport coefficient vanishes")
    B = (-2j * xi[1] + phase.X_frame[1]) if d == 2 else 0.0

    grad_phi = phase.gradient()
    lap_phi = phase.laplacian()
    amps: list[AmplitudeJet] = []
    prev: Optional[Jet] = None
    for n in range(n_max + 1):
        bc0 = 1.0 if n == 0 else 0.0
        rhs = Jet.zero(amp_order, d) if prev is None else sum(
            (prev.diff(ax).diff(ax) for ax in range(d)), Jet.zero(amp_order, d))

        def transport_value(psi: Jet) -> Jet:
            acc = (-1j) * lap_phi.mul(psi, amp_order)
            for ax in range(d):
                acc = acc + (-2j) * grad_phi[ax].mul(psi.diff(ax), amp_order) \
                    + phase.X_frame[ax] * psi.diff(ax)
            return acc - Jet(rhs.coeffs, amp_order, d)

        psi = Jet.zero(amp_order, d)
        if d == 1:
            psi.coeffs[0] = bc0
            for r in range(0, amp_order):
                tv = transport_value(psi)
                psi.coeffs[r + 1] = -tv.coeffs[r] / (A * (r + 1))
        else:
            psi.coeffs[0, 0] = bc0
            for snew in range(1, amp_order + 1):
                r = snew - 1
                psi.coeffs[0, snew] = 0.0
                restr = _graph_coefficient(psi, phase.boundary_graph, snew)
                psi.coeffs[0, snew] = (bc0 if snew == 0 else 0.0) - restr
                tv = transport_value(psi)
                for m in range(0, snew):
                    n2 = r - m
                    val = tv.coeffs[m, n2]
                    if m >= 1:
                        val = val + B * (n2 + 1) * psi.coeffs[m, n2 + 1]
                    psi.coeffs[m + 1, n2] = -val / (A * (m + 1))
        amps.append(AmplitudeJet(psi, n, phase.root))
        prev = psi
    return amps


# ===================================================================== #
#  cutoff
# ===================================================================== #

@dataclass
class Cutoff:
    """Radial bump: 1 inside r_inner, smooth decay to 0 at r_outer."""

    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not 0 < self.r_inner < self.r_outer:
            raise ValueError("need 0 < r_inner < r_outer")

    def _s(self, r):
        return (r - self.r_inner) / (self.r_outer - self.r_inner)

    def value(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        s = np.clip(self._s(r), 0.0, 1.0)
        out = np.zeros_like(s)
        out[s <= 0.0] = 1.0
        mid = (s > 0.0) & (s < 1.0)
        sm = s[mid]
        out[mid] = np.exp(1.0 - 1.0 / (1.0 - sm ** 2))
        return out

    def derivatives(self, r: np.ndarray):
        """chi, chi', chi'' with respect to r."""
        r = np.asarray(r, dtype=float)
        dr = self.r_outer - self.r_inner
        s = self._s(r)
        chi = self.value(r)
        d1 = np.zeros_like(chi)
        d2 = np.zeros_like(chi)
        mid = (s > 0.0) & (s < 1.0)
        sm = s[mid]
        om = 1.0 - sm ** 2
        fp = -2.0 * sm / om ** 2
        fpp = -(2.0 + 6.0 * sm ** 2) / om ** 3
        d1[mid] = chi[mid] * fp / dr
        d2[mid] = chi[mid] * (fpp + fp ** 2) / dr ** 2
        return chi, d1, d2


# ===================================================================== #
#  quasimode
# ===================================================================== #

@dataclass
class Quasimode:
    sp: SpectralPoint
    frame: BoundaryFrame
    phases: tuple                      # (PhaseJet|CharacteristicPhase, ...)
    amplitudes: tuple                  # matching tuple of lists of AmplitudeJet
    cutoff: Cutoff
    boundary_graph: Jet
    X_frame: np.ndarray

    @property
    def dim(self) -> int:
        return self.frame.dimension

    # -------------------------------------------------------------- #
    def frame_coords(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rel = pts - self.frame.x0[None, :]
        if self.dim == 1:
            return rel * self.frame.normal[None, :]
        v1 = rel @ self.frame.normal
        v2 = rel @ self.frame.tangent
        return np.column_stack([v1, v2])

    def _phase_data(self, i: int, pts: np.ndarray, w: np.ndarray):
        """phi, grad phi (frame), lap phi, and exact p_z(d phi) at the points."""
        ph = self.phases[i]
        if isinstance(ph, PhaseJet):
            if self.dim == 1:
                args = (w[:, 0],)
            else:
                args = (w[:, 0], w[:, 1])
            phi = ph.jet.eval(*args)
            grad = np.stack([g.eval(*args) for g in ph.gradient()], axis=1)
            lap = ph.laplacian().eval(*args)
            eik = ph.eikonal_residual_jet().eval(*args)
            return phi, grad, lap, eik
        return ph.phase_data(pts)       # characteristic backend

    def _amp_data(self, i: int, w: np.ndarray):
        """a = sum h^n psi_n and its frame gradient / laplacian at the points."""
        h = self.sp.h
        if self.dim == 1:
            args = (w[:, 0],)
        else:
            args = (w[:, 0], w[:, 1])
        a = np.zeros(w.shape[0], dtype=complex)
        ga = np.zeros((w.shape[0], self.dim), dtype=complex)
        la = np.zeros(w.shape[0], dtype=complex)
        for amp in self.amplitudes[i]:
            hn = h ** amp.n
            a += hn * amp.jet.eval(*args)
            for ax in range(self.dim):
                ga[:, ax] += hn * amp.jet.diff(ax).eval(*args)
            la += hn * sum(amp.jet.diff(ax).diff(ax).eval(*args)
                           for ax in range(self.dim))
        return a, ga, la

    def _exp_phase(self, phi: np.ndarray) -> np.ndarray:
        ex = 1j * phi / self.sp.h
        return np.exp(np.clip(ex.real, -700.0, 700.0) + 1j * ex.imag)

    def evaluate(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        w = self.frame_coords(pts)
        r = np.linalg.norm(w, axis=1)
        chi = self.cutoff.value(r)
        out = np.zeros(pts.shape[0], dtype=complex)
        live = chi > 0.0
        if np.any(live):
            wl, pl = w[live], pts[live]
            total = np.zeros(live.sum(), dtype=complex)
            for i, sign in ((0, 1.0), (1, -1.0)):
                phi, _, _, _ = self._phase_data(i, pl, wl)
                a, _, _ = self._amp_data(i, wl)
                total += sign * a * self._exp_phase(phi)
            out[live] = chi[live] * total
        return out

    __call__ = evaluate

    def pz_values(self, pts) -> np.ndarray:
        """(P - z) u by the exact differentiation identity."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        w = self.frame_coords(pts)
        r = np.linalg.norm(w, axis=1)
        chi, dchi, ddchi = self.cutoff.derivatives(r)
        out = np.zeros(pts.shape[0], dtype=complex)
        live = chi > 0.0
        if not np.any(live):
            return out
        wl, pl = w[live], pts[live]
        h = self.sp.h
        rl = np.maximum(r[live], 1e-300)
        grad_chi = dchi[live][:, None] * wl / rl[:, None]
        lap_chi = ddchi[live] + dchi[live] * (self.dim - 1) / rl
        acc = np.zeros(live.sum(), dtype=complex)
        for i, sign in ((0, 1.0), (1, -1.0)):
            phi, gphi, lphi, eik = self._phase_data(i, pl, wl)
            a, ga, la = self._amp_data(i, wl)
            expf = self._exp_phase(phi)
            transport = np.zeros_like(a)
            for ax in range(self.dim):
                transport += (-2j * gphi[:, ax] * ga[:, ax]
                              + self.X_frame[ax] * ga[:, ax])
            transport += -1j * lphi * a
            interior = a * eik + h * transport - h * h * la
            grad_v = ga + a[:, None] * (1j / h) * gphi
            comm = (-h * h * (lap_chi * a + 2 * np.einsum("pk,pk->p", grad_chi, grad_v))
                    + h * np.einsum("k,pk->p", self.X_frame, grad_chi) * a)
            acc += sign * (chi[live] * interior + comm) * expf
        out[live] = acc
        return out

    def boundary_points_frame(self, ts: np.ndarray) -> np.ndarray:
        g = self.boundary_graph.eval(ts).real
        return np.column_stack([g, ts])

    def ambient(self, w: np.ndarray) -> np.ndarray:
        """Map frame coordinates back to ambient points."""
        w = np.atleast_2d(w)
        if self.dim == 1:
            return self.frame.x0[None, :] + w * self.frame.normal[None, :]
        return (self.frame.x0[None, :]
                + np.outer(w[:, 0], self.frame.normal)
                + np.outer(w[:, 1], self.frame.tangent))


def collar_check(phases, boundary_graph, cutoff: Cutoff, dim: int,
                 n_samples: int = 400) -> bool:
    """Im(phi_i) > 0 on the boundary part of the cutoff collar, both phases."""
    if dim == 1:
        return True      # the boundary near x0 is the single point x0
    ts = np.linspace(-cutoff.r_outer, cutoff.r_outer, n_samples)
    g = boundary_graph.eval(ts).real
    r = np.hypot(g, ts)
    sel = (r >= cutoff.r_inner) & (r <= cutoff.r_outer)
    if not np.any(sel):
        return True
    w = np.column_stack([g[sel], ts[sel]])
    for ph in phases:
        if isinstance(ph, PhaseJet):
            vals = ph.jet.eval(w[:, 0], w[:, 1])
        else:
            vals = ph.phase_only_frame(w)
        if np.any(vals.imag <= 0.0):
            return False
    return True


def assemble_quasimode(phases, amplitudes, sp: SpectralPoint,
                       radii: Optional[tuple] = None,
                       diameter: Optional[float] = None,
                       auto_shrink: bool = True) -> Quasimode:
    """Attach the cutoff and validate the collar positivity of Im(phase)."""
    first = phases[0]
    frame = first.seed.frame
    graph = first.boundary_graph
    if radii is None:
        if diameter is None:
            raise ValueError("radii or domain diameter required")
        radii = (0.15 * diameter, 0.30 * diameter)
    r_in, r_out = radii
    cut = Cutoff(r_in, r_out)
    dim = frame.dimension
    while not collar_check(phases, graph, cut, dim):
        if not auto_shrink:
            # scan inward for the widest passing radius to suggest
            for shrink in np.linspace(0.9, 0.1, 17):
                trial = Cutoff(r_in * shrink, r_out * shrink)
                if collar_check(phases, graph, trial, dim):
                    raise CutoffError(
                        f"Im(phase) not positive on the collar; try radii "
                        f"({r_in * shrink:.4g}, {r_out * shrink:.4g})")
            raise CutoffError("Im(phase) not positive on any tested collar")
        r_in *= 0.75
        r_out *= 0.75
        if r_out < 1e-3 * (diameter or 1.0):
            raise CutoffError("collar check failed down to negligible radii")
        cut = Cutoff(r_in, r_out)
    X_frame = first.X_frame
    return Quasimode(sp, frame, tuple(phases), tuple(amplitudes), cut, graph,
                     X_frame)


def build_quasimode(domain, field_like, x0, z: complex, h: float,
                    order: int = 4, n_max: int = 0, a_param: float = 0.5,
                    eps: float = 1.0, radii: Optional[tuple] = None,
                    backend: str = "jet") -> Quasimode:
    """One-stop construction used by the CLI and the test fixtures."""
    from .geometry import _as_field
    fieldspec = _as_field(field_like)
    sp = SpectralPoint(z, h, fieldspec.X)
    frame = boundary_frame(domain, fieldspec, x0)
    seed = phase_seed(frame, sp, a_param=a_param, eps=eps)
    graph = boundary_graph_jet(domain, frame, order)
    p1, p2 = solve_eikonal_jet(seed, graph, order)
    if backend == "jet":
        phases = (p1, p2)
    elif backend == "characteristic":
        phases = (CharacteristicPhase(domain, seed, 1),
                  CharacteristicPhase(domain, seed, 2))
    else:
        raise ValueError(f"unknown backend '{backend}'")
    amps = (solve_transport_jet(p1, n_max, order),
            solve_transport_jet(p2, n_max, order))
    return assemble_quasimode(phases, amps, sp, radii=radii,
                              diameter=domain.diameter())


# ===================================================================== #
#  residual quadrature
# ===================================================================== #

@dataclass
class QuadratureSpec:
    points_per_scale: int = 12
    refine_factor: float = 1.5
    max_rel_change: float = 0.01

    def __post_init__(self):
        if self.points_per_scale < 12:
            raise ResolutionError(
                "quadrature must carry at least 12 points per scale")


@dataclass
class ResidualReport:
    norm_u: float
    norm_pzu: float
    ratio: float
    norm_u_coarse: float
    norm_pzu_coarse: float


def _panel_edges(scale: float, extent: float, cap: float = 6.0) -> np.ndarray:
    """Doubling panels starting at ``scale``, width capped at ``cap * scale``.

    The cap keeps every panel within a few oscillation wavelengths of the
    phase (which oscillates at scale h normally, sqrt(h) tangentially), so a
    fixed Gauss rule per panel resolves the integrand.
    """
    edges = [0.0]
    a = min(scale, extent)
    while edges[-1] < extent:
        edges.append(min(edges[-1] + a, extent))
        a = min(2.0 * a, cap * scale)
    return np.asarray(edges)


def _edge_refined_panels(scale: float, extent: float, breakpoints: Sequence[float],
                         edge_scale: float) -> np.ndarray:
    """Doubling panels plus h-scale refinement opening from each breakpoint.

    The cutoff derivative switches on at the collar radii, multiplying a
    decay of rate ~1/edge_scale; panels must shrink to edge_scale there.
    """
    pts = set(np.round(_panel_edges(scale, extent), 15).tolist())
    for b in breakpoints:
        if not 0.0 < b < extent:
            continue
        step = edge_scale
        off = 0.0
        while off < 8.0 * scale:
            off += step
            step *= 2.0
            for val in (b - off, b + off):
                if 0.0 < val < extent:
                    pts.add(round(val, 15))
        pts.add(round(b, 15))
    edges = np.asarray(sorted(pts))
    keep = np.concatenate([[True], np.diff(edges) > 1e-12])
    return edges[keep]


def _gauss_on_panels(edges: np.ndarray, n: int):
    x0, w0 = np.polynomial.legendre.leggauss(n)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (b - a) * x0 + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w0)
    return np.concatenate(xs), np.concatenate(ws)


def _residual_norms(q: Quasimode, n_per_scale: int) -> tuple[float, float]:
    h = q.sp.h
    cut = q.cutoff
    ts = np.linspace(-cut.r_outer, cut.r_outer, 101)
    gmax = float(np.max(np.abs(q.boundary_graph.eval(ts).real))) if q.dim == 2 else 0.0
    depth = cut.r_outer + gmax + 1e-9
    w1, wt1 = _gauss_on_panels(_panel_edges(h, depth), n_per_scale)
    w1 = -w1                       # interior side of the straightened boundary
    if q.dim == 1:
        pts = q.ambient(w1[:, None])
        wts = wt1
        u = q.evaluate(pts)
        pu = q.pz_values(pts)
        nu = float(np.sqrt(np.sum(wts * np.abs(u) ** 2)))
        npu = float(np.sqrt(np.sum(wts * np.abs(pu) ** 2)))
        return nu, npu
    w2_half, wt2_half = _gauss_on_panels(
        _edge_refined_panels(math.sqrt(h), cut.r_outer + 1e-9,
                             (cut.r_inner, cut.r_outer), h), n_per_scale)
    w2 = np.concatenate([-w2_half[::-1], w2_half])
    wt2 = np.concatenate([wt2_half[::-1], wt2_half])
    W1, W2 = np.meshgrid(w1, w2, indexing="ij")
    WT = np.outer(wt1, wt2)
    g = q.boundary_graph.eval(W2.ravel()).real
    v1 = W1.ravel() + g            # shear back to frame coordinates
    v2 = W2.ravel()
    pts = q.ambient(np.column_stack([v1, v2]))
    u = q.evaluate(pts)
    pu = q.pz_values(pts)
    wts = WT.ravel()
    nu = float(np.sqrt(np.sum(wts * np.abs(u) ** 2)))
    npu = float(np.sqrt(np.sum(wts * np.abs(pu) ** 2)))
    return nu, npu


def quasimode_residual(q: Quasimode, quad: QuadratureSpec | None = None
                       ) -> ResidualReport:
    """L2 norms of u and (P-z)u over the cutoff support, with refinement check."""
    quad = quad or QuadratureSpec()
    n0 = quad.points_per_scale
    n1 = int(math.ceil(n0 * quad.refine_factor))
    nu0, npu0 = _residual_norms(q, n0)
    nu1, npu1 = _residual_norms(q, n1)
    if abs(nu1 - nu0) > quad.max_rel_change * nu1 or \
       abs(npu1 - npu0) > quad.max_rel_change * max(npu1, 1e-300):
        raise ResolutionError(
            f"quadrature under-resolved: ||u|| {nu0:.6e} -> {nu1:.6e}, "
            f"||P_z u|| {npu0:.6e} -> {npu1:.6e}")
    return ResidualReport(nu1, npu1, npu1 / nu1, nu0, npu0)


# ===================================================================== #
#  characteristic (analytic) phase backend, d = 2
# ===================================================================== #

class _AnalyticBoundary:
    """Complex-analytic boundary parametrization y -> x_b(y) near x0."""

    def __init__(self, domain, frame: BoundaryFrame):
        t0 = frame.t
        self.theta0 = 2.0 * math.pi * t0
        if isinstance(domain, Disk):
            self.kind = "disk"
            self.c = domain.center.astype(complex)
            self.r = domain.radius
            self.scale = 1.0 / domain.radius    # unit speed at y = 0
        elif isinstance(domain, Ellipse):
            self.kind = "ellipse"
            self.c = domain.center.astype(complex)
            self.ax = domain.semi_axes.astype(float)
            self.rot = domain.rot.astype(float)
            v = domain._velocity(np.array([t0]))[0]
            self.scale = 2.0 * math.pi / np.linalg.norm(v)
        else:
            raise GeometryError(
                "characteristic backend needs an analytic Disk or Ellipse boundary")

    def _angle(self, y):
        return self.theta0 + self.scale * y

    def point(self, y):
        th = self._angle(y)
        if self.kind == "disk":
            return self.c[None, :] + self.r * np.stack([np.cos(th), np.sin(th)], axis=-1)
        loc = np.stack([self.ax[0] * np.cos(th), self.ax[1] * np.sin(th)], axis=-1)
        return self.c[None, :] + loc @ self.rot.T

    def d1(self, y):
        th = self._angle(y)
        if self.kind == "disk":
            return self.r * self.scale * np.stack([-np.sin(th), np.cos(th)], axis=-1)
        loc = self.scale * np.stack([-self.ax[0] * np.sin(th),
                                     self.ax[1] * np.cos(th)], axis=-1)
        return loc @ self.rot.T

    def d2(self, y):
        th = self._angle(y)
        if self.kind == "disk":
            return -self.r * self.scale ** 2 * np.stack([np.cos(th), np.sin(th)], axis=-1)
        loc = -self.scale ** 2 * np.stack([self.ax[0] * np.cos(th),
                                           self.ax[1] * np.sin(th)], axis=-1)
        return loc @ self.rot.T

    def normal(self, y):
        th = self._angle(y)
        if self.kind == "disk":
            return np.stack([np.cos(th), np.sin(th)], axis=-1)
        loc = np.stack([np.cos(th) / self.ax[0], np.sin(th) / self.ax[1]], axis=-1)
        return loc @ self.rot.T

    def dnormal(self, y):
        th = self._angle(y)
        if self.kind == "disk":
            return self.scale * np.stack([-np.sin(th), np.cos(th)], axis=-1)
        loc = self.scale * np.stack([-np.sin(th) / self.ax[0],
                                     np.cos(th) / self.ax[1]], axis=-1)
        return loc @ self.rot.T


def _bdot(a, b):
    """Bilinear (unconjugated) dot along the last axis."""
    return np.sum(a * b, axis=-1)


class CharacteristicPhase:
    """Exact eikonal solution by flowing the boundary covector along rays.

    With constant X the bicharacteristics are straight complex lines
    x = x_b(y) + t (2 xi(y) + i X); the phase is phi_0(y) + t (2z - i<X, xi>)
    and d phi = xi(y), so p_z(x, d phi) = 0 holds identically.
    """

    def __init__(self, domain, seed: PhaseSeed, root: int):
        self.seed = seed
        self.root = root
        frame = seed.frame
        self.frame = frame
        self.bnd = _AnalyticBoundary(domain, frame)
        self.sp = seed.sp
        self.Xc = seed.sp.X.astype(complex)
        self.z = seed.sp.z
        self.tau = frame.tangent.astype(complex)
        self.x0 = frame.x0.astype(complex)
        self._diam = domain.diameter()
        self.boundary_graph = boundary_graph_jet(domain, frame, 8)
        if frame.dimension != 2:
            raise GeometryError("characteristic backend is two-dimensional only")
        self.X_frame = np.array([float(np.dot(seed.sp.X, frame.normal)),
                                 float(np.dot(seed.sp.X, frame.tangent))])
        # choose the square-root branch matching the seed at y = 0
        self._branch = 1.0
        v0 = self._xi_normal_component(np.array([0.0 + 0.0j]))[0]
        want = seed.sp.field_norm * (seed.alpha[root - 1] + 1j * seed.beta[root - 1])
        n0 = self.bnd.normal(np.array([0.0 + 0.0j]))[0]
        nfac = _bdot(n0, self.frame.normal.astype(complex))
        if abs(v0 * nfac - want) > abs(v0 * nfac + want):
            self._branch = -1.0
            v0 = self._xi_normal_component(np.array([0.0 + 0.0j]))[0]
        if abs(v0 * nfac - want) > 1e-9 * max(1.0, abs(want)):
            raise OutOfChartError("failed to match the seed covector branch")

    # -------------------------------------------------------------- #
    def _phi0(self, y):
        t = _bdot(self.bnd.point(y) - self.x0[None, :], self.tau)
        s = self.sp.field_norm
        return s * (self.seed.lam * t + 0.5 * self.seed.tangential_hessian * t * t)

    def _dphi0(self, y):
        xb1 = self.bnd.d1(y)
        t = _bdot(self.bnd.point(y) - self.x0[None, :], self.tau)
        tp = _bdot(xb1, self.tau)
        s = self.sp.field_norm
        return s * (self.seed.lam + self.seed.tangential_hessian * t) * tp

    def _d2phi0(self, y):
        xb1, xb2 = self.bnd.d1(y), self.bnd.d2(y)
        t = _bdot(self.bnd.point(y) - self.x0[None, :], self.tau)
        tp = _bdot(xb1, self.tau)
        tpp = _bdot(xb2, self.tau)
        s = self.sp.field_norm
        M = self.seed.tangential_hessian
        return s * (M * tp * tp + (self.seed.lam + M * t) * tpp)

    def _quadratic_pieces(self, y):
        xb1 = self.bnd.d1(y)
        n = self.bnd.normal(y)
        gamma = _bdot(xb1, xb1)
        nn = _bdot(n, n)
        Xn = _bdot(self.Xc[None, :], n)
        Xt = _bdot(self.Xc[None, :], xb1)
        u = self._dphi0(y) / gamma
        cc = u * u * gamma + 1j * u * Xt - self.z
        disc = -Xn * Xn - 4.0 * nn * cc
        sq = self._branch * np.sqrt(disc)
        v = (-1j * Xn + sq) / (2.0 * nn)
        return u, v, n, xb1, sq, gamma, nn, Xn, Xt

    def _xi_normal_component(self, y):
        u, v, n, xb1, sq, *_ = self._quadratic_pieces(y)
        return v

    def _xi(self, y):
        u, v, n, xb1, *_ = self._quadratic_pieces(y)
        return u[:, None] * xb1 + v[:, None] * n

    def _xi_prime(self, y):
        # analytic derivative of xi(y) via implicit differentiation
        u, v, n, xb1, sq, gamma, nn, Xn, Xt = self._quadratic_pieces(y)
        xb2 = self.bnd.d2(y)
        n1 = self.bnd.dnormal(y)
        gamma_p = 2.0 * _bdot(xb1, xb2)
        nn_p = 2.0 * _bdot(n, n1)
        Xn_p = _bdot(self.Xc[None, :], n1)
        Xt_p = _bdot(self.Xc[None, :], xb2)
        up = (self._d2phi0(y) * gamma - self._dphi0(y) * gamma_p) / gamma ** 2
        cc_p = 2.0 * u * up * gamma + u * u * gamma_p + 1j * (up * Xt + u * Xt_p)
        # nn v^2 + i Xn v + cc = 0  =>  v' = -(nn' v^2 + i Xn' v + cc') / (2 nn v + i Xn)
        vp = -(nn_p * v * v + 1j * Xn_p * v + cc_p) / (2.0 * nn * v + 1j * Xn)
        return (up[:, None] * xb1 + u[:, None] * xb2
                + vp[:, None] * n + v[:, None] * n1)

    # -------------------------------------------------------------- #
    def _invert_chart(self, pts: np.ndarray, maxit: int = 60):
        """Newton solve of x_b(y) + t c(y) = x for (t, y), vectorized."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float)).astype(complex)
        rel = pts - self.x0[None, :]
        y = rel @ self.tau                         # linearized start
        t = (rel @ self.frame.normal.astype(complex))
        xi0 = self._xi(np.zeros(1, dtype=complex))[0]
        c0 = 2.0 * xi0 + 1j * self.Xc
        denom = c0 @ self.frame.normal.astype(complex)
        t = t / denom
        for _ in range(maxit):
            xi = self._xi(y)
            c = 2.0 * xi + 1j * self.Xc[None, :]
            F = self.bnd.point(y) + t[:, None] * c - pts
            err = np.max(np.abs(F), axis=1)
            if np.all(err < 1e-13):
                break
            cp = 2.0 * self._xi_prime(y)
            j12 = self.bnd.d1(y) + t[:, None] * cp
            det = c[:, 0] * j12[:, 1] - c[:, 1] * j12[:, 0]
            dt = (F[:, 0] * j12[:, 1] - F[:, 1] * j12[:, 0]) / det
            dy = (c[:, 0] * F[:, 1] - c[:, 1] * F[:, 0]) / det
            step = np.maximum(np.abs(dt), np.abs(dy))
            damp = np.where(step > 0.5, 0.5 / np.maximum(step, 1e-300), 1.0)
            t = t - damp * dt
            y = y - damp * dy
        xi = self._xi(y)
        c = 2.0 * xi + 1j * self.Xc[None, :]
        F = self.bnd.point(y) + t[:, None] * c - pts
        bad = np.max(np.abs(F), axis=1) > 1e-9
        # Newton may converge to a non-local complex chart point; reject
        # solutions whose boundary angle or ray length leaves the collar
        angle = self.bnd.scale * y
        bad |= (np.abs(angle.real) > 2.0) | (np.abs(angle.imag) > 1.0)
        bad |= np.abs(t) * np.max(np.abs(c), axis=1) > 0.7 * self._diam
        if np.any(bad):
            raise OutOfChartError(
                f"chart inversion failed at {int(bad.sum())} points "
                "(outside the characteristic collar)")
        return t, y

    def phase_data(self, pts: np.ndarray):
        """phi, frame gradient, laplacian, and p_z(d phi) (identically ~0)."""
        t, y = self._invert_chart(pts)
        xi = self._xi(y)
        phi = self._phi0(y) + t * (2.0 * self.z - 1j * _bdot(self.Xc[None, :], xi))
        nu = self.frame.normal.astype(complex)
        tau = self.tau
        grad = np.column_stack([xi @ nu, xi @ tau])
        xip = self._xi_prime(y)
        c = 2.0 * xi + 1j * self.Xc[None, :]
        j12 = self.bnd.d1(y) + 2.0 * t[:, None] * xip
        detJ = c[:, 0] * j12[:, 1] - c[:, 1] * j12[:, 0]
        lap = (c[:, 0] * xip[:, 1] - c[:, 1] * xip[:, 0]) / detJ
        pz = _bdot(xi, xi) + 1j * _bdot(self.Xc[None, :], xi) - self.z
        return phi, grad, lap, pz

    def phase_only_frame(self, w: np.ndarray) -> np.ndarray:
        """Phase at frame coordinates (used by the collar check)."""
        pts = (self.frame.x0[None, :]
               + np.outer(w[:, 0], self.frame.normal)
               + np.outer(w[:, 1], self.frame.tangent))
        phi, _, _, _ = self.phase_data(pts)
        return phi

    def __call__(self, x) -> complex:
        phi, _, _, _ = self.phase_data(np.atleast_2d(np.asarray(x, dtype=float)))
        return complex(phi[0])

    def transported_amplitude(self, pts: np.ndarray) -> np.ndarray:
        """Closed-form leading amplitude sqrt(det J(0) / det J(t)) along rays."""
        t, y = self._invert_chart(pts)
        xi = self._xi(y)
        xip = self._xi_prime(y)
        c = 2.0 * xi + 1j * self.Xc[None, :]
        xb1 = self.bnd.d1(y)
        d0 = c[:, 0] * xb1[:, 1] - c[:, 1] * xb1[:, 0]
        d1 = 2.0 * (c[:, 0] * xip[:, 1] - c[:, 1] * xip[:, 0])
        return np.sqrt(d0 / (d0 + t * d1))


def characteristic_phase(frame_or_seed, sp_or_none=None, domain=None, x=None,
                         root: int = 1):
    """Evaluate the characteristic phase at a single point.

    Accepts either a prepared PhaseSeed or (frame, sp); the domain must be a
    Disk or Ellipse.
    """
    if isinstance(frame_or_seed, PhaseSeed):
        seed = frame_or_seed
    else:
        seed = phase_seed(frame_or_seed, sp_or_none)
    ch = CharacteristicPhase(domain, seed, root)
    return ch(x)
