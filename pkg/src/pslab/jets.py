"""Truncated multivariate power series (jets) with complex coefficients.

A jet of order K in d variables (d = 1 or 2) stores the coefficient array of
a polynomial truncated at total degree K.  Coefficients live in a dense
``(K+1,)*d`` complex array indexed by exponent; entries with total degree
above K are kept at zero.  Arithmetic is exact on the stored coefficients;
multiplication truncates back to the jet order unless asked not to.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as npoly


def _total_degree_mask(order: int, dim: int, shape: tuple) -> np.ndarray:
    if dim == 1:
        idx = np.arange(shape[0])
        return idx <= order
    i, j = np.indices(shape)
    return (i + j) <= order


class Jet:
    """Polynomial truncated at total degree ``order`` in ``dim`` variables."""

    __slots__ = ("coeffs", "order", "dim")

    def __init__(self, coeffs: np.ndarray, order: int, dim: int):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim != dim:
            raise ValueError(f"coefficient array must be {dim}-dimensional")
        self.order = int(order)
        self.dim = int(dim)
        full = np.zeros((order + 1,) * dim, dtype=complex)
        sl = tuple(slice(0, min(s, order + 1)) for s in coeffs.shape)
        full[sl] = coeffs[sl]
        full[~_total_degree_mask(order, dim, full.shape)] = 0.0
        self.coeffs = full

    # ------------------------------------------------------------------ #
    @classmethod
    def zero(cls, order: int, dim: int) -> "Jet":
        return cls(np.zeros((order + 1,) * dim), order, dim)

    @classmethod
    def constant(cls, value: complex, order: int, dim: int) -> "Jet":
        j = cls.zero(order, dim)
        j.coeffs[(0,) * dim] = value
        return j

    @classmethod
    def variable(cls, axis: int, order: int, dim: int) -> "Jet":
        j = cls.zero(order, dim)
        idx = [0] * dim
        idx[axis] = 1
        j.coeffs[tuple(idx)] = 1.0
        return j

    # ------------------------------------------------------------------ #
    def copy(self) -> "Jet":
        return Jet(self.coeffs.copy(), self.order, self.dim)

    def __add__(self, other):
        if np.isscalar(other):
            out = self.copy()
            out.coeffs[(0,) * self.dim] += other
            return out
        order = min(self.order, other.order)
        a = Jet(self.coeffs, order, self.dim)
        a.coeffs += Jet(other.coeffs, order, self.dim).coeffs
        return a

    __radd__ = __add__

    def __neg__(self):
        out = self.copy()
        out.coeffs = -out.coeffs
        return out

    def __sub__(self, other):
        if np.isscalar(other):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            out = self.copy()
            out.coeffs = out.coeffs * other
            return out
        return self.mul(other)

    __rmul__ = __mul__

    def mul(self, other: "Jet", order: int | None = None) -> "Jet":
        """Product, truncated at ``order`` (defaults to min of the operand orders)."""
        if order is None:
            order = min(self.order, other.order)
        if self.dim == 1:
            c = np.convolve(self.coeffs, other.coeffs)
        else:
            c = _conv2(self.coeffs, other.coeffs)
        return Jet(c, order, self.dim)

    def mul_full(self, other: "Jet") -> "Jet":
        """Exact product without total-degree truncation loss."""
        return self.mul(other, order=self.order + other.order)

    def power(self, n: int, order: int | None = None) -> "Jet":
        if order is None:
            order = self.order
        out = Jet.constant(1.0, order, self.dim)
        base = Jet(self.coeffs, order, self.dim)
        for _ in range(n):
            out = out.mul(base, order)
        return out

    def diff(self, axis: int = 0) -> "Jet":
        """Partial derivative along ``axis``; order drops by one degree of content."""
        c = self.coeffs
        if self.dim == 1:
            d = c[1:] * np.arange(1, c.shape[0])
        else:
            if axis == 0:
                d = c[1:, :] * np.arange(1, c.shape[0])[:, None]
            else:
                d = c[:, 1:] * np.arange(1, c.shape[1])[None, :]
        return Jet(d, self.order, self.dim)

    def eval(self, *points) -> np.ndarray:
        """Evaluate at points; each argument is an array of one coordinate."""
        if self.dim == 1:
            return npoly.polyval(np.asarray(points[0]), self.coeffs)
        return npoly.polyval2d(np.asarray(points[0]), np.asarray(points[1]),
                               self.coeffs)

    def compose_graph(self, g: "Jet") -> "Jet":
        """Restrict a 2-variable jet to the curve v1 = g(t), v2 = t.

        ``g`` is a 1-variable jet in t; the result is a 1-variable jet in t
        of the same order as self.
        """
        if self.dim != 2:
            raise ValueError("graph composition needs a 2-variable jet")
        order = self.order
        out = np.zeros(order + 1, dtype=complex)
        gpow = np.zeros(order + 1, dtype=complex)
        gpow[0] = 1.0  # g^0
        for m in range(self.coeffs.shape[0]):
            row = self.coeffs[m, :order + 1]          # coefficients of v2^n at v1^m
            contrib = np.convolve(gpow, row)[:order + 1]
            out += contrib
            gpow = np.convolve(gpow, g.coeffs)[:order + 1]
        return Jet(out, order, 1)

    def degree_slice(self, degree: int) -> np.ndarray:
        """Coefficients of exact total degree ``degree`` (as a masked array copy)."""
        mask = _total_degree_mask(degree, self.dim, self.coeffs.shape) & \
            ~_total_degree_mask(degree - 1, self.dim, self.coeffs.shape)
        out = np.zeros_like(self.coeffs)
        out[mask] = self.coeffs[mask]
        return out

    def max_coeff_through(self, degree: int) -> float:
        """Largest coefficient magnitude among terms of total degree <= degree."""
        mask = _total_degree_mask(degree, self.dim, self.coeffs.shape)
        return float(np.abs(self.coeffs[mask]).max()) if mask.any() else 0.0


def _conv2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1),
                   dtype=complex)
    for i in range(a.shape[0]):
        row = a[i]
        if not row.any():
            continue
        for j in range(a.shape[1]):
            if row[j] != 0.0:
                out[i:i + b.shape[0], j:j + b.shape[1]] += row[j] * b
    return out


def series_inverse(t_of_s: np.ndarray, order: int) -> np.ndarray:
    """Invert a 1D power series t(s) with t(0)=0, t'(0) != 0; returns s(t)."""
    t = np.asarray(t_of_s, dtype=complex)
    if abs(t[1]) < 1e-300:
        raise ZeroDivisionError("series not invertible: vanishing linear term")
    s = np.zeros(order + 1, dtype=complex)
    s[1] = 1.0 / t[1]
    # Newton-free order-by-order matching of t(s(u)) = u.
    for k in range(2, order + 1):
        comp = np.zeros(order + 1, dtype=complex)
        spow = np.zeros(order + 1, dtype=complex)
        spow[0] = 1.0
        for m in range(0, order + 1):
            if m >= 1:
                spow = np.convolve(spow, s)[:order + 1]
            if m < len(t) and t[m] != 0.0:
                comp += t[m] * spow
        # coefficient of u^k must vanish; it is linear in s[k] with factor t[1]
        s[k] -= comp[k] / t[1]
    return s
