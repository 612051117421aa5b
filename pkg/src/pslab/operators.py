"""Finite-difference discretization of P = -h^2*Laplace + h<X, grad>, Dirichlet.

Interior lattice nodes carry centered second-order stencils; nodes next to a
curved boundary use Shortley-Weller unequal-arm stencils with the Dirichlet
value eliminated.  Advection is centered (never upwinded): the point of this
operator is its non-normality, so the discretization must not add artificial
dissipation.  Callers are expected to keep dx small enough relative to h
(grid Peclet |X| dx / (2h) < 1) for the boundary layer to be resolved.

The conjugated spectrum oracle returns the exact eigenvalues
|X|^2/4 + h^2 lambda_k(-Laplace_Dirichlet), valid for constant X because
e^{<X,x>/2h} P e^{-<X,x>/2h} = -h^2*Laplace + |X|^2/4.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import jn_zeros

from .errors import OracleUnavailableError, ResolutionError
from .geometry import Disk, Interval


@dataclass
class GridOperator:
    domain: object
    h: float
    X: np.ndarray
    dx: float
    matrix: sp.csr_matrix
    points: np.ndarray            # (n, d) interior node coordinates
    index: dict                   # structured index -> row
    scheme: str
    regularized_arms: int = 0     # Shortley-Weller arms clamped at 0.1 dx
    shape: Optional[tuple] = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def shifted(self, z: complex) -> sp.csr_matrix:
        return (self.matrix - z * sp.identity(self.n, dtype=complex,
                                              format="csr")).tocsr()

    def norm_estimate(self) -> float:
        """Infinity norm; cheap scale reference for floors and tolerances."""
        return float(np.max(np.abs(self.matrix).sum(axis=1)))

    def interior_mask_uniform(self) -> np.ndarray:
        """Rows whose stencil touches no Shortley-Weller arm (2D) / all rows (1D)."""
        if self.dimension == 1:
            return np.ones(self.n, dtype=bool)
        return self._uniform_rows

    def to_matrix_market(self) -> bytes:
        buf = io.BytesIO()
        from scipy.io import mmwrite
        mmwrite(buf, self.matrix.tocoo())
        return buf.getvalue()

    def grid_manifest(self) -> dict:
        return {
            "dimension": int(self.dimension),
            "n_interior": int(self.n),
            "dx": self.dx,
            "h": self.h,
            "X": np.asarray(self.X, dtype=float).tolist(),
            "scheme": self.scheme,
            "regularized_arms": int(self.regularized_arms),
            "domain": repr(self.domain),
        }


def assemble_1d(interval: Interval, h: float, X, n: int) -> GridOperator:
    """Tridiagonal P on n interior points of the interval."""
    if n < 8:
        raise ResolutionError("need at least 8 interior points")
    Xv = float(np.atleast_1d(X)[0])
    L = interval.b - interval.a
    dx = L / (n + 1)
    xs = interval.a + dx * np.arange(1, n + 1)
    main = np.full(n, 2.0 * h * h / dx / dx, dtype=complex)
    upper = np.full(n - 1, -h * h / dx / dx + h * Xv / (2 * dx), dtype=complex)
    lower = np.full(n - 1, -h * h / dx / dx - h * Xv / (2 * dx), dtype=complex)
    mat = sp.diags([lower, main, upper], [-1, 0, 1], format="csr")
    return GridOperator(interval, h, np.array([Xv]), dx, mat,
                        xs[:, None], {i: i for i in range(n)}, "centered-1d")


def assemble_2d(domain, h: float, X, dx: float) -> GridOperator:
    """Five-point stencil with Shortley-Weller arms at the curved boundary."""
    Xv = np.asarray(X, dtype=float)
    diam = domain.diameter()
    if diam / dx < 16:
        raise ResolutionError("grid must resolve the boundary: >= 16 cells across")
    poly = domain
    # lattice covering the bounding box, half-cell margin
    pts_box = domain.polygonize(256).vertices if hasattr(domain, "polygonize") \
        else domain.vertices
    lo = pts_box.min(axis=0) - 0.5 * dx
    hi = pts_box.max(axis=0) + 0.5 * dx
    nx = int(np.ceil((hi[0] - lo[0]) / dx)) + 1
    ny = int(np.ceil((hi[1] - lo[1]) / dx)) + 1
    gx = lo[0] + dx * np.arange(nx)
    gy = lo[1] + dx * np.arange(ny)
    GX, GY = np.meshgrid(gx, gy, indexing="ij")
    nodes = np.column_stack([GX.ravel(), GY.ravel()])
    sd = domain.signed_distance(nodes).reshape(nx, ny)
    inside = sd < 0.0
    idx = -np.ones((nx, ny), dtype=np.int64)
    ii, jj = np.nonzero(inside)
    idx[ii, jj] = np.arange(len(ii))
    n = len(ii)
    points = np.column_stack([gx[ii], gy[jj]])

    dirs = [(+1, 0), (-1, 0), (0, +1), (0, -1)]
    arms = np.full((n, 4), dx)
    nbr = -np.ones((n, 4), dtype=np.int64)
    regularized = 0
    clamped_rows = np.zeros(n, dtype=bool)
    for k, (di, dj) in enumerate(dirs):
        i2 = ii + di
        j2 = jj + dj
        ok = (0 <= i2) & (i2 < nx) & (0 <= j2) & (j2 < ny)
        nin = np.zeros(n, dtype=bool)
        nin[ok] = inside[i2[ok], j2[ok]]
        nbr[nin, k] = idx[i2[nin], j2[nin]]
        cut = ~nin
        if np.any(cut):
            # bisection for the boundary crossing along the arm
            t_lo = np.zeros(cut.sum())
            t_hi = np.ones(cut.sum())
            base = points[cut]
            step = np.array([di, dj], dtype=float) * dx
            for _ in range(45):
                t_mid = 0.5 * (t_lo + t_hi)
                mid_sd = domain.signed_distance(base + t_mid[:, None] * step[None, :])
                neg = mid_sd < 0
                t_lo[neg] = t_mid[neg]
                t_hi[~neg] = t_mid[~neg]
            theta = 0.5 * (t_lo + t_hi)
            clamped = theta < 0.1
            regularized += int(np.count_nonzero(clamped))
            cut_rows = np.nonzero(cut)[0]
            clamped_rows[cut_rows[clamped]] = True
            theta = np.maximum(theta, 0.1)
            arms[cut, k] = theta * dx

    rows, cols, vals = [], [], []
    hp, hm = arms[:, 0], arms[:, 1]   # x+ and x- arms
    vp, vm = arms[:, 2], arms[:, 3]   # y+ and y- arms

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    diag = np.zeros(n, dtype=complex)
    # x direction: u_xx and u_x with unequal arms (exact on quadratics)
    diag += -h * h * (-2.0 / (hp * hm)) + h * Xv[0] * ((hp - hm) / (hp * hm))
    diag += -h * h * (-2.0 / (vp * vm)) + h * Xv[1] * ((vp - vm) / (vp * vm))
    coef_e = -h * h * (2.0 / (hp * (hp + hm))) + h * Xv[0] * (hm / (hp * (hp + hm)))
    coef_w = -h * h * (2.0 / (hm * (hp + hm))) + h * Xv[0] * (-hp / (hm * (hp + hm)))
    coef_n = -h * h * (2.0 / (vp * (vp + vm))) + h * Xv[1] * (vm / (vp * (vp + vm)))
    coef_s = -h * h * (2.0 / (vm * (vp + vm))) + h * Xv[1] * (-vp / (vm * (vp + vm)))
    for k, coef in enumerate((coef_e, coef_w, coef_n, coef_s)):
        has = nbr[:, k] >= 0
        r = np.nonzero(has)[0]
        for ri in r:
            add(ri, nbr[ri, k], coef[ri])
    mat = sp.coo_matrix((np.concatenate([vals, diag]),
                         (np.concatenate([rows, np.arange(n)]),
                          np.concatenate([cols, np.arange(n)]))),
                        shape=(n, n), dtype=complex).tocsr()
    op = GridOperator(domain, h, Xv, dx, mat, points,
                      {"shape": (nx, ny)}, "shortley-weller-2d",
                      regularized_arms=regularized, shape=(nx, ny))
    uniform = np.all(np.abs(arms - dx) < 1e-12 * dx, axis=1)
    # a row is uniform-stencil only if it and all neighbors are uncut
    unif_rows = uniform.copy()
    for k in range(4):
        has = nbr[:, k] >= 0
        unif_rows[has] &= uniform[nbr[has, k]]
        unif_rows[~has] = False
    op._uniform_rows = unif_rows
    op.clamped_rows = clamped_rows
    return op


def symmetrizer_1d(op: GridOperator) -> np.ndarray:
    """Diagonal D with D P D^{-1} exactly symmetric on the uniform 1D grid.

    The continuum conjugation weight is e^{<X,x>/2h}; on the lattice the
    exact weight uses the one-step ratio kappa = sqrt((2h + X dx)/(2h - X dx))
    = e^{X dx / 2 h_eff}, which tends to the continuum weight as dx -> 0.
    """
    X = float(op.X[0])
    t = X * op.dx / (2.0 * op.h)
    if abs(t) >= 1.0:
        raise ResolutionError("grid Peclet >= 1: no real symmetrizer")
    kappa = np.sqrt((1.0 + t) / (1.0 - t))
    return kappa ** np.arange(op.n)


def conjugated_spectrum_oracle(domain, h: float, X, k_max: int) -> np.ndarray:
    """Exact spectrum |X|^2/4 + h^2 lambda_k(-Laplace) for Interval and Disk."""
    Xn2 = float(np.sum(np.atleast_1d(np.asarray(X, dtype=float)) ** 2))
    if isinstance(domain, Interval):
        L = domain.b - domain.a
        ks = np.arange(1, k_max + 1)
        return Xn2 / 4.0 + h * h * (np.pi * ks / L) ** 2
    if isinstance(domain, Disk):
        vals = []
        for m in range(0, k_max + 6):
            zeros = jn_zeros(m, k_max)
            lam = (zeros / domain.radius) ** 2
            mult = 1 if m == 0 else 2     # cos/sin degeneracy
            vals.extend(list(lam) * mult)
        vals = np.sort(np.asarray(vals))[:k_max]
        return Xn2 / 4.0 + h * h * vals
    raise OracleUnavailableError(
        f"no closed-form spectrum for {type(domain).__name__}")
