"""Frequency-side form of the second variation.

Transform convention: unitary, a(xi) = (2 pi)^-3/2 int theta(x) e^{-i xi.x} dx,
so Parseval carries no factor.  On a periodic grid with spacing dx and n
points per axis the discrete version is exact:
    dx^3 sum |theta|^2 = dxi^3 sum |a|^2,   dxi = 2 pi / (n dx).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fields import FieldError, GridSpec, SymTensorField

II_PREFACTOR = -1.0 / (128.0 * math.pi ** 2)


@dataclass(frozen=True)
class SymbolMatrix:
    """A(xi) with leading batch axes: A (..., 3, 3) complex, xi (..., 3)."""

    A: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        if self.A.shape[-2:] != (3, 3) or self.xi.shape[-1] != 3:
            raise FieldError("symbol needs A (...,3,3) and xi (...,3)")


@dataclass(frozen=True)
class SymbolField:
    """Transform of theta on the frequency grid dual to ``grid``."""

    symbol: SymbolMatrix
    grid: GridSpec

    @property
    def dxi(self) -> float:
        return 2 * math.pi / (self.grid.n[0] * self.grid.spacing)

    @property
    def cell_volume(self) -> float:
        return self.dxi ** 3


@dataclass(frozen=True)
class GridTensor:
    """theta sampled on a periodic grid: values (n, n, n, 3, 3), real."""

    values: np.ndarray
    grid: GridSpec

    def trace_free_part(self) -> "GridTensor":
        tr = np.trace(self.values, axis1=-2, axis2=-1)
        return GridTensor(self.values - tr[..., None, None] * np.eye(3) / 3.0, self.grid)


def periodic_grid(radius: float = 12.0, points: int = 96) -> GridSpec:
    return GridSpec.cube(radius, points, periodic=True)


def frequencies(grid: GridSpec) -> np.ndarray:
    axes = [2 * math.pi * np.fft.fftfreq(n, grid.spacing) for n in grid.n]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _origin_phase(grid: GridSpec, xi: np.ndarray) -> np.ndarray:
    return np.exp(-1j * (xi @ np.asarray(grid.origin, dtype=float)))


def _sample(theta, grid: GridSpec) -> np.ndarray:
    if isinstance(theta, GridTensor):
        if theta.grid != grid:
            raise FieldError("grid tensor lives on a different grid")
        return theta.values
    if isinstance(theta, SymTensorField):
        if not theta.decay_exponent < -1.5:
            raise FieldError(f"theta decay {theta.decay_exponent} is too slow for L^2")
        return theta(grid.points())
    raise FieldError("theta must be a SymTensorField or a GridTensor")


def theta_transform(theta, grid: GridSpec | None = None) -> SymbolField:
    grid = grid or periodic_grid()
    vals = _sample(theta, grid)
    xi = frequencies(grid)
    scale = grid.spacing ** 3 / (2 * math.pi) ** 1.5
    A = np.fft.fftn(vals, axes=(0, 1, 2)) * (scale * _origin_phase(grid, xi))[..., None, None]
    return SymbolField(SymbolMatrix(A, xi), grid)


def inverse_transform(A: np.ndarray, grid: GridSpec) -> np.ndarray:
    xi = frequencies(grid)
    dxi = 2 * math.pi / (grid.n[0] * grid.spacing)
    scale = dxi ** 3 * np.prod(grid.n) / (2 * math.pi) ** 1.5
    return np.fft.ifftn(A / _origin_phase(grid, xi)[..., None, None], axes=(0, 1, 2)) * scale


def _sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def symbol_integrand(A, xi=None) -> np.ndarray:
    """Frequency integrand of -128 pi^2 II at each xi (real, batched)."""
    if isinstance(A, SymbolMatrix):
        A, xi = A.A, A.xi
    A = _sym(np.asarray(A, dtype=complex))
    xi = np.asarray(xi, dtype=float)
    x2 = np.sum(xi * xi, axis=-1)
    Ax = np.einsum("...ij,...j->...i", A, xi)
    xAx = np.einsum("...i,...i->...", xi, Ax)
    tr = np.trace(A, axis1=-2, axis2=-1)
    A2 = np.sum(np.abs(A) ** 2, axis=(-2, -1))
    val = (-2 * np.sum(np.abs(Ax) ** 2, axis=-1) * x2 + 0.5 * np.abs(xAx) ** 2
           + 0.5 * xAx * np.conj(tr) * x2 + 0.5 * np.conj(xAx) * tr * x2
           - 0.5 * np.abs(tr) ** 2 * x2 ** 2 + A2 * x2 ** 2)
    return val.real


def householder(xi) -> np.ndarray:
    """Orthogonal O (batched) with O e1 = xi / |xi|; identity where xi = 0."""
    xi = np.asarray(xi, dtype=float)
    n = np.linalg.norm(xi, axis=-1, keepdims=True)
    u = np.divide(xi, n, out=np.zeros_like(xi), where=n > 0)
    u = np.where(n > 0, u, np.array([1.0, 0.0, 0.0]))
    # reflect e1 onto sign * u; the sign keeps v = e1 - sign u away from zero
    sign = np.where(u[..., :1] >= 0, -1.0, 1.0)
    v = -sign * u
    v[..., 0] += 1.0
    vv = np.sum(v * v, axis=-1)[..., None, None]
    H = np.eye(3) - 2 * np.einsum("...i,...j->...ij", v, v) / vv
    # H e1 = sign u; flip the first column so O e1 = u
    H[..., :, 0] *= sign
    return H


def rotated_symbol_value(A, xi=None) -> np.ndarray:
    """(1/2 |b22 - b33|^2 + 2 |b23|^2) |xi|^4 with B = O^T A O, O e1 = xi/|xi|."""
    if isinstance(A, SymbolMatrix):
        A, xi = A.A, A.xi
    A = _sym(np.asarray(A, dtype=complex))
    xi = np.asarray(xi, dtype=float)
    O = householder(xi)
    B = np.einsum("...ai,...ab,...bj->...ij", O, A, O)
    x2 = np.sum(xi * xi, axis=-1)
    return (0.5 * np.abs(B[..., 1, 1] - B[..., 2, 2]) ** 2 + 2 * np.abs(B[..., 1, 2]) ** 2) * x2 ** 2


def null_projection(A, xi) -> np.ndarray:
    """Least-squares projection of A onto {alpha delta + beta xi^T + xi beta^T}."""
    A = _sym(np.asarray(A, dtype=complex))
    xi = np.asarray(xi, dtype=float)
    basis = [np.broadcast_to(np.eye(3), A.shape).astype(complex)]
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        b = np.einsum("i,...j->...ij", e, xi)
        basis.append(b + np.swapaxes(b, -1, -2) + 0j)
    Bm = np.stack([b.reshape(b.shape[:-2] + (9,)) for b in basis], axis=-1)  # (..., 9, 4)
    rhs = A.reshape(A.shape[:-2] + (9,))
    coef = np.linalg.lstsq(Bm, rhs, rcond=None)[0] if Bm.ndim == 2 else np.stack(
        [np.linalg.lstsq(m, r, rcond=None)[0] for m, r in zip(Bm.reshape(-1, 9, 4), rhs.reshape(-1, 9))]
    ).reshape(rhs.shape[:-1] + (4,))
    return np.einsum("...ck,...k->...c", Bm, coef).reshape(A.shape)


def null_distance(A, xi) -> np.ndarray:
    """Frobenius distance of A from the null subspace at xi."""
    A = _sym(np.asarray(A, dtype=complex))
    return np.sqrt(np.sum(np.abs(A - null_projection(A, xi)) ** 2, axis=(-2, -1)))


def parseval_ii(theta, grid: GridSpec | None = None) -> float:
    sf = theta_transform(theta, grid)
    vals = symbol_integrand(sf.symbol)
    return II_PREFACTOR * float(np.sum(vals)) * sf.cell_volume


def spectral_ii_integrand(theta: GridTensor) -> np.ndarray:
    """Real-space integrand sum M^2 - 3/2 s^2 with spectral derivatives (grid route)."""
    grid = theta.grid
    xi = frequencies(grid)
    a = np.fft.fftn(theta.values, axes=(0, 1, 2))
    # d_a d_b theta_ij  <->  -xi_a xi_b a_ij
    ax = np.einsum("...ik,...k->...i", a, xi)
    axx = np.einsum("...i,...i->...", ax, xi)
    x2 = np.sum(xi * xi, axis=-1)
    tr = np.trace(a, axis1=-2, axis2=-1)
    xx = np.einsum("...i,...j->...ij", xi, xi)
    m_hat = -(np.einsum("...i,...j->...ij", ax, xi) + np.einsum("...j,...i->...ij", ax, xi)
              - xx * tr[..., None, None] - x2[..., None, None] * a)
    s_hat = -(axx - x2 * tr)
    M = np.fft.ifftn(m_hat, axes=(0, 1, 2)).real
    s = np.fft.ifftn(s_hat, axes=(0, 1, 2)).real
    return np.sum(M * M, axis=(-2, -1)) - 1.5 * s * s


Profile = Callable[[np.ndarray], np.ndarray]


def null_symbol_synthesize(alpha: Profile | None, beta: Profile | None, grid: GridSpec | None = None,
                           tol: float = 1e-10) -> GridTensor:
    """theta whose transform is alpha delta + beta xi^T + xi beta^T.

    ``alpha(xi)`` returns (...), ``beta(xi)`` returns (..., 3); both may be
    complex but must satisfy a(-xi) = conj a(xi) so that theta is real.
    """
    grid = grid or periodic_grid()
    xi = frequencies(grid)
    A = np.zeros(xi.shape[:-1] + (3, 3), dtype=complex)
    if alpha is not None:
        A += np.asarray(alpha(xi))[..., None, None] * np.eye(3)
    if beta is not None:
        b = np.asarray(beta(xi))
        bx = np.einsum("...i,...j->...ij", b, xi)
        A += bx + np.swapaxes(bx, -1, -2)
    theta = inverse_transform(A, grid)
    scale = max(float(np.max(np.abs(theta))), 1e-300)
    if float(np.max(np.abs(theta.imag))) > tol * scale:
        raise FieldError("profiles are not conjugate symmetric: synthesized theta is complex")
    return GridTensor(np.ascontiguousarray(theta.real), grid)


def gaussian_transform(xi: np.ndarray, width: float = 1.0) -> np.ndarray:
    """Unitary transform of exp(-|x|^2 / w^2): (w^2/2)^{3/2} exp(-w^2 |xi|^2 / 4)."""
    x2 = np.sum(xi * xi, axis=-1)
    return (width ** 2 / 2) ** 1.5 * np.exp(-width ** 2 * x2 / 4)


def tt_project(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Transverse-traceless part of a real grid tensor (Fourier projector)."""
    xi = frequencies(grid)
    x2 = np.sum(xi * xi, axis=-1)
    safe = np.where(x2 > 0, x2, 1.0)
    P = np.eye(3) - np.einsum("...i,...j->...ij", xi, xi) / safe[..., None, None]
    P = np.where((x2 > 0)[..., None, None], P, np.eye(3))
    a = np.fft.fftn(_sym(values), axes=(0, 1, 2))
    pap = np.einsum("...ik,...kl,...jl->...ij", P, a, P)
    trp = np.trace(pap, axis1=-2, axis2=-1)
    rank = np.where(x2 > 0, 2.0, 3.0)  # P projects onto xi-perp, or is the identity at xi = 0
    out = pap - P * (trp / rank)[..., None, None]
    # drop the unpaired Nyquist planes so the result stays real and exact
    for ax in range(3):
        n = grid.n[ax]
        if n % 2 == 0:
            idx = [slice(None)] * 3
            idx[ax] = n // 2
            out[tuple(idx)] = 0.0
    return np.fft.ifftn(out, axes=(0, 1, 2)).real


def spectral_divergence(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """sum_j d_j T_ij by spectral differentiation."""
    xi = frequencies(grid)
    a = np.fft.fftn(values, axes=(0, 1, 2))
    return np.fft.ifftn(1j * np.einsum("...ij,...j->...i", a, xi), axes=(0, 1, 2)).real
