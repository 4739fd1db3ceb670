"""Truncated multivariate Taylor polynomials ("jets") in three variables.

A jet of order ``k`` stores the Taylor coefficients ``c_alpha`` of a smooth
function about a base point for every multi-index ``|alpha| <= k``, so that
``d^alpha f = alpha! * c_alpha``.  Coefficients live on the last array axis in
graded order; a jet of order ``k`` uses the first ``n_monomials(k)`` slots and
truncation is plain slicing.  Leading axes are batch or tensor axes.

Products are exact up to the truncation order, so every partial derivative
obtained through this algebra is the closed-form value (up to rounding).
"""

from __future__ import annotations

from functools import lru_cache
from math import comb, factorial
from typing import Sequence

import numpy as np

DIM = 3


def n_monomials(order: int) -> int:
    return comb(order + DIM, DIM)


@lru_cache(maxsize=None)
def monomials(order: int) -> tuple[tuple[int, int, int], ...]:
    """Exponent tuples in graded order (degree, then descending lexicographic)."""
    out = []
    for d in range(order + 1):
        for a in range(d, -1, -1):
            for b in range(d - a, -1, -1):
                out.append((a, b, d - a - b))
    return tuple(out)


@lru_cache(maxsize=None)
def monomial_index(order: int) -> dict[tuple[int, int, int], int]:
    return {m: i for i, m in enumerate(monomials(order))}


@lru_cache(maxsize=None)
def _mul_table(order: int):
    mons = monomials(order)
    idx = monomial_index(order)
    pairs = []
    for ia, a in enumerate(mons):
        for ib, b in enumerate(mons):
            s = (a[0] + b[0], a[1] + b[1], a[2] + b[2])
            if sum(s) <= order:
                pairs.append((idx[s], ia, ib))
    pairs.sort()
    out = np.array([p[0] for p in pairs])
    ia = np.array([p[1] for p in pairs])
    ib = np.array([p[2] for p in pairs])
    starts = np.flatnonzero(np.r_[True, out[1:] != out[:-1]])
    return ia, ib, starts


@lru_cache(maxsize=None)
def _deriv_table(order: int, axis: int):
    """Source slots and factors so that d_axis c has order ``order - 1``."""
    idx = monomial_index(order)
    src, fac = [], []
    for m in monomials(order - 1):
        up = list(m)
        up[axis] += 1
        src.append(idx[tuple(up)])
        fac.append(float(up[axis]))
    return np.array(src, dtype=int), np.array(fac)


def _factorial_weight(alpha: Sequence[int]) -> float:
    w = 1.0
    for a in alpha:
        w *= factorial(a)
    return w


class Jet:
    """Batched array of truncated Taylor polynomials."""

    __slots__ = ("c", "order")
    __array_priority__ = 1000

    def __init__(self, c: np.ndarray, order: int):
        c = np.asarray(c, dtype=float)
        if c.shape[-1] != n_monomials(order):
            raise ValueError(f"coefficient axis {c.shape[-1]} does not match order {order}")
        self.c = c
        self.order = order

    # construction -----------------------------------------------------
    @staticmethod
    def constant(value, order: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (n_monomials(order),))
        c[..., 0] = value
        return Jet(c, order)

    @staticmethod
    def zeros(shape, order: int) -> "Jet":
        return Jet(np.zeros(tuple(shape) + (n_monomials(order),)), order)

    # basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[:-1]

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        if order == self.order:
            return self
        return Jet(self.c[..., : n_monomials(order)], order)

    def coefficient(self, alpha: Sequence[int]) -> np.ndarray:
        return self.c[..., monomial_index(self.order)[tuple(alpha)]]

    def partial(self, alpha: Sequence[int]) -> np.ndarray:
        """Partial derivative d^alpha at the base point."""
        alpha = tuple(int(a) for a in alpha)
        if sum(alpha) > self.order:
            raise ValueError(f"derivative order {sum(alpha)} exceeds jet order {self.order}")
        return _factorial_weight(alpha) * self.coefficient(alpha)

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx):
            return Jet(self.c[idx + (slice(None),)], self.order)
        return Jet(self.c[idx], self.order)

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, order={self.order})"

    # linear structure ---------------------------------------------------
    def _pair(self, other):
        if isinstance(other, Jet):
            k = min(self.order, other.order)
            return self.truncate(k), other.truncate(k)
        return self, None

    def __add__(self, other):
        a, b = self._pair(other)
        if b is None:
            other = np.asarray(other, dtype=float)
            shape = np.broadcast_shapes(a.shape, other.shape)
            c = np.broadcast_to(a.c, shape + a.c.shape[-1:]).copy()
            c[..., 0] += other
            return Jet(c, a.order)
        return Jet(a.c + b.c, a.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return _product(self, other)
        other = np.asarray(other, dtype=float)
        return Jet(self.c * other[..., None], self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return _product(self, other.reciprocal())
        other = np.asarray(other, dtype=float)
        return Jet(self.c / other[..., None], self.order)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = Jet.constant(np.ones(self.shape), self.order)
            base = self
            while p:
                if p & 1:
                    out = out * base
                p >>= 1
                if p:
                    base = base * base
            return out
        return self.power(float(p))

    # univariate functions ---------------------------------------------
    def _compose(self, coeffs: list[np.ndarray]) -> "Jet":
        """Evaluate sum_n coeffs[n] * u**n with u the non-constant part (Horner)."""
        u = Jet(self.c.copy(), self.order)
        u.c[..., 0] = 0.0
        out = Jet.constant(coeffs[self.order], self.order)
        for n in range(self.order - 1, -1, -1):
            out = out * u + coeffs[n]
        return out

    def power(self, p: float) -> "Jet":
        a0 = self.value
        coeffs = []
        binom = 1.0
        for n in range(self.order + 1):
            coeffs.append(binom * a0 ** (p - n))
            binom *= (p - n) / (n + 1)
        return self._compose(coeffs)

    def reciprocal(self) -> "Jet":
        return self.power(-1.0)

    def sqrt(self) -> "Jet":
        return self.power(0.5)

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self._compose([e / factorial(n) for n in range(self.order + 1)])

    def log(self) -> "Jet":
        a0 = self.value
        coeffs = [np.log(a0)]
        for n in range(1, self.order + 1):
            coeffs.append((-1.0) ** (n + 1) / (n * a0 ** n))
        return self._compose(coeffs)

    def sin(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cyc = [s, c, -s, -c]
        return self._compose([cyc[n % 4] / factorial(n) for n in range(self.order + 1)])

    def cos(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cyc = [c, -s, -c, s]
        return self._compose([cyc[n % 4] / factorial(n) for n in range(self.order + 1)])

    # calculus -----------------------------------------------------------
    def d(self, axis: int) -> "Jet":
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = _deriv_table(self.order, axis)
        return Jet(self.c[..., src] * fac, self.order - 1)

    def grad(self) -> "Jet":
        """Gradient with the derivative index appended as the last tensor axis."""
        return stack([self.d(a) for a in range(DIM)], axis=-1)

    # tensor helpers -----------------------------------------------------
    def sum(self, axis) -> "Jet":
        axis = _lead_axes(axis, len(self.shape))
        return Jet(self.c.sum(axis=axis), self.order)

    def transpose(self, *axes) -> "Jet":
        """Permute the trailing ``len(axes)`` tensor axes; batch axes stay in front."""
        n = len(self.shape)
        m = len(axes)
        perm = tuple(range(n - m)) + tuple(n - m + a for a in axes) + (n,)
        return Jet(np.transpose(self.c, perm), self.order)

    def swapaxes(self, a: int, b: int) -> "Jet":
        n = len(self.shape)
        return Jet(np.swapaxes(self.c, a % n, b % n), self.order)

    def expand_dims(self, axis: int) -> "Jet":
        n = len(self.shape)
        axis = axis if axis >= 0 else axis + n + 1
        return Jet(np.expand_dims(self.c, axis), self.order)


def _lead_axes(axis, ndim):
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def _product(a: Jet, b: Jet) -> Jet:
    k = min(a.order, b.order)
    ia, ib, starts = _mul_table(k)
    # accumulate pair products slot by slot on monomial-major copies; this
    # avoids materializing every pair product at once
    at = np.ascontiguousarray(np.moveaxis(a.c, -1, 0))
    bt = np.ascontiguousarray(np.moveaxis(b.c, -1, 0))
    shape = np.broadcast_shapes(at.shape[1:], bt.shape[1:])
    out = np.empty((len(starts),) + shape)
    tmp = np.empty(shape)
    ends = list(starts[1:]) + [len(ia)]
    for m, (s, e) in enumerate(zip(starts, ends)):
        o = out[m:m + 1].reshape(shape)  # a view even for scalar jets
        np.multiply(at[ia[s]], bt[ib[s]], out=o)
        for q in range(s + 1, e):
            np.multiply(at[ia[q]], bt[ib[q]], out=tmp)
            o += tmp
    return Jet(np.moveaxis(out, 0, -1), k)


def stack(jets: Sequence[Jet], axis: int = -1) -> Jet:
    k = min(j.order for j in jets)
    cs = [j.truncate(k).c for j in jets]
    nlead = cs[0].ndim - 1
    ax = axis if axis >= 0 else axis + nlead + 1
    return Jet(np.stack(cs, axis=ax), k)


def einsum(subscripts: str, *operands) -> Jet:
    """Einstein summation over tensor axes of jets and constant arrays.

    At most two operands may be jets; constant ``ndarray`` operands enter
    linearly.  Batch axes are broadcast through an implicit leading ``...``.
    """
    ins, out = subscripts.replace(" ", "").split("->")
    ins = ins.split(",")
    if len(ins) != len(operands):
        raise ValueError("operand count does not match subscripts")
    jet_pos = [i for i, o in enumerate(operands) if isinstance(o, Jet)]
    if not jet_pos:
        raise ValueError("einsum needs at least one jet operand")
    if len(jet_pos) > 2:
        raise ValueError("einsum supports at most two jet operands")
    arrays = []
    terms = []
    if len(jet_pos) == 1:
        j = operands[jet_pos[0]]
        k = j.order
        for i, (s, o) in enumerate(zip(ins, operands)):
            if isinstance(o, Jet):
                arrays.append(o.c)
                terms.append("..." + s + "p")
            else:
                arrays.append(np.asarray(o, dtype=float))
                terms.append("..." + s)
        res = np.einsum(",".join(terms) + "->..." + out + "p", *arrays)
        return Jet(res, k)
    k = min(operands[p].order for p in jet_pos)
    ia, ib, starts = _mul_table(k)
    sel = {jet_pos[0]: ia, jet_pos[1]: ib}
    for i, (s, o) in enumerate(zip(ins, operands)):
        if isinstance(o, Jet):
            arrays.append(o.truncate(k).c[..., sel[i]])
            terms.append("..." + s + "p")
        else:
            arrays.append(np.asarray(o, dtype=float))
            terms.append("..." + s)
    res = np.einsum(",".join(terms) + "->..." + out + "p", *arrays, optimize=True)
    return Jet(np.add.reduceat(res, starts, axis=-1), k)


def coordinates(points: np.ndarray, order: int) -> list[Jet]:
    """Coordinate jets x_a about each base point (points has shape (..., 3))."""
    points = np.asarray(points, dtype=float)
    out = []
    idx = monomial_index(order)
    for a in range(DIM):
        c = np.zeros(points.shape[:-1] + (n_monomials(order),))
        c[..., 0] = points[..., a]
        if order >= 1:
            e = [0, 0, 0]
            e[a] = 1
            c[..., idx[tuple(e)]] = 1.0
        out.append(Jet(c, order))
    return out


def inverse(m: Jet) -> Jet:
    """Inverse of a jet of square matrices by Newton iteration on the nilpotent part."""
    x = Jet.constant(np.linalg.inv(m.value), m.order)
    exact = 0
    while exact < m.order:
        mx = einsum("ij,jk->ik", m, x)
        x = 2.0 * x - einsum("ij,jk->ik", x, mx)
        exact = 2 * exact + 1
    return x


def cholesky(m: Jet) -> Jet:
    """Lower-triangular L with L L^T = m, computed entrywise in jet arithmetic."""
    n = m.shape[-1]
    rows: list[list[Jet | None]] = [[None] * n for _ in range(n)]
    zero = Jet.zeros(m.shape[:-2], m.order)
    for i in range(n):
        for j in range(i + 1):
            s = m[..., i, j]
            for k in range(j):
                s = s - rows[i][k] * rows[j][k]
            if i == j:
                rows[i][j] = s.sqrt()
            else:
                rows[i][j] = s / rows[j][j]
    full = [[rows[i][j] if j <= i else zero for j in range(n)] for i in range(n)]
    return stack([stack(r, axis=-1) for r in full], axis=-2)


def compose(outer: Jet, inner: Sequence[Jet]) -> Jet:
    """Substitute jets ``inner`` (one per variable) into the Taylor polynomial ``outer``.

    ``outer`` must be expanded about the base values of ``inner``; the result
    is a jet in the variables of ``inner``.
    """
    k = min([outer.order] + [j.order for j in inner])
    du = []
    for j in inner:
        u = Jet(j.truncate(k).c.copy(), k)
        u.c[..., 0] = 0.0
        du.append(u)
    mons = monomials(k)
    idx = monomial_index(k)
    powers: dict[tuple[int, int, int], Jet] = {(0, 0, 0): Jet.constant(np.ones(du[0].shape), k)}
    for m in mons[1:]:
        a = next(i for i in range(DIM) if m[i] > 0)
        prev = list(m)
        prev[a] -= 1
        powers[m] = powers[tuple(prev)] * du[a]
    oc = outer.truncate(k).c
    batch = du[0].shape
    extra = (1,) * (oc.ndim - 1 - len(batch))
    res = np.zeros(oc.shape[:-1] + (n_monomials(k),))
    for m in mons:
        pm = powers[m].c.reshape(batch + extra + (n_monomials(k),))
        res += oc[..., idx[m], None] * pm
    return Jet(res, k)
