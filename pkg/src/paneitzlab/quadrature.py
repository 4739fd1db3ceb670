"""Quadrature rules on R^3, on coordinate spheres |x| = R, and on S^3.

Every rule is a (points, weights) pair.  ``integrate`` evaluates an
integrand chunk by chunk and sums the chunk totals with ``math.fsum`` so
the result does not depend on chunking or evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fields import FieldError, GridSpec

Integrand = Callable[[np.ndarray], np.ndarray]
DEFAULT_CHUNK = 20000


@dataclass(frozen=True)
class Rule:
    points: np.ndarray  # (m, d)
    weights: np.ndarray  # (m,)
    name: str = ""
    chunk: int = DEFAULT_CHUNK

    def __len__(self) -> int:
        return self.weights.size

    def __add__(self, other: "Rule") -> "Rule":
        return Rule(np.concatenate([self.points, other.points]),
                    np.concatenate([self.weights, other.weights]), f"{self.name}+{other.name}",
                    min(self.chunk, other.chunk))


@dataclass(frozen=True)
class Integral:
    value: float
    quadrature_error: float = 0.0
    tail_bound: float = 0.0
    levels: tuple[float, ...] = field(default=())

    def __float__(self) -> float:
        return self.value

    @property
    def error_budget(self) -> float:
        return self.quadrature_error + self.tail_bound


def integrate(fn: Integrand, rule: Rule) -> float:
    totals = []
    n = len(rule)
    for start in range(0, n, rule.chunk):
        sl = slice(start, min(start + rule.chunk, n))
        vals = np.asarray(fn(rule.points[sl]), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise FieldError(f"integrand is not finite on rule {rule.name}")
        totals.append(float(np.dot(vals, rule.weights[sl])))
    return math.fsum(totals)


def integrate_refined(fn: Integrand, make_rule: Callable[[int], Rule], levels=(1, 2)) -> Integral:
    """Integrate on successively refined rules; the error estimate is the last change."""
    vals = [integrate(fn, make_rule(level)) for level in levels]
    err = abs(vals[-1] - vals[-2]) if len(vals) > 1 else 0.0
    return Integral(vals[-1], err, 0.0, tuple(vals))


# ---------------------------------------------------------------------------
# R^3


def cube_rule(radius: float = 12.0, points: int = 96) -> Rule:
    """Trapezoid (periodic) rule on [-R, R)^3; spectral for integrands decaying fast."""
    grid = GridSpec.cube(radius, points, periodic=True)
    pts = grid.points().reshape(-1, 3)
    return Rule(pts, np.full(pts.shape[0], grid.cell_volume), f"cube(R={radius},n={points})")


def hermite_rule(n: int = 24, scale: float = 1.0, center=(0.0, 0.0, 0.0)) -> Rule:
    """Product Gauss-Hermite rule for integrands decaying like exp(-|x - c|^2 / s^2) or faster."""
    t, w = np.polynomial.hermite.hermgauss(n)
    x = scale * t
    wx = scale * w * np.exp(t * t)
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3) + np.asarray(center, dtype=float)
    W = (wx[:, None, None] * wx[None, :, None] * wx[None, None, :]).ravel()
    return Rule(X, W, f"hermite(n={n},s={scale})")


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def angular_rule(n_theta: int, n_phi: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Unit-sphere directions and weights (Gauss in cos theta, trapezoid in phi)."""
    n_phi = n_phi or 2 * n_theta
    ct, wt = gauss_legendre(n_theta)
    phi = 2 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
    st = np.sqrt(1 - ct ** 2)
    dirs = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                     np.outer(ct, np.ones(n_phi))], axis=-1).reshape(-1, 3)
    w = np.outer(wt, np.full(n_phi, 2 * math.pi / n_phi)).ravel()
    return dirs, w


def _product_radial(r: np.ndarray, wr: np.ndarray, n_theta: int, center) -> tuple[np.ndarray, np.ndarray]:
    dirs, wa = angular_rule(n_theta)
    pts = r[:, None, None] * dirs[None, :, :] + np.asarray(center, dtype=float)
    w = (wr * r ** 2)[:, None] * wa[None, :]
    return pts.reshape(-1, 3), w.ravel()


def radial_rule(n_r: int = 48, n_theta: int = 24, scale: float = 1.0, center=(0.0, 0.0, 0.0)) -> Rule:
    """Rule on all of R^3 in polar coordinates about ``center``.

    The radius is mapped r = scale u / (1 - u) with Gauss-Legendre in u, so
    integrands with algebraic decay are integrated without truncation and
    1/|x - center| singularities are absorbed by the r^2 Jacobian.
    """
    u, wu = gauss_legendre(n_r, 0.0, 1.0)
    r = scale * u / (1 - u)
    wr = wu * scale / (1 - u) ** 2
    pts, w = _product_radial(r, wr, n_theta, center)
    return Rule(pts, w, f"radial(n={n_r},{n_theta},s={scale})")


def panel_radial_rule(breaks=(0.5, 1.0, 2.0, 4.0, 8.0), n_panel: int = 16, n_theta: int = 24,
                      center=(0.0, 0.0, 0.0)) -> Rule:
    """Gauss-Legendre on each radial panel [b_i, b_i+1] plus a mapped tail beyond the last break.

    Panels keep nodes dense where an integrand has a transition band (for
    example a cutoff); the tail uses r = b + b u / (1 - u).
    """
    edges = (0.0,) + tuple(float(b) for b in breaks)
    rs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        r, w = gauss_legendre(n_panel, a, b)
        rs.append(r)
        ws.append(w)
    u, wu = gauss_legendre(n_panel, 0.0, 1.0)
    b = edges[-1]
    rs.append(b + b * u / (1 - u))
    ws.append(wu * b / (1 - u) ** 2)
    pts, w = _product_radial(np.concatenate(rs), np.concatenate(ws), n_theta, center)
    return Rule(pts, w, f"panels({len(edges)},n={n_panel},{n_theta})")


def ball_rule(radius: float, n_r: int = 32, n_theta: int = 24, center=(0.0, 0.0, 0.0)) -> Rule:
    r, wr = gauss_legendre(n_r, 0.0, radius)
    pts, w = _product_radial(r, wr, n_theta, center)
    return Rule(pts, w, f"ball(R={radius})")


def _frame_with_axis(axis: np.ndarray) -> np.ndarray:
    """Orthonormal columns (e1, e2, axis)."""
    a = axis / np.linalg.norm(axis)
    helper = np.eye(3)[int(np.argmin(np.abs(a)))]
    e1 = np.cross(a, helper)
    e1 /= np.linalg.norm(e1)
    return np.stack([e1, np.cross(a, e1), a], axis=1)


def star_rule(origin, radius: float, center=(0.0, 0.0, 0.0), n_r: int = 32, n_theta: int = 24) -> Rule:
    """Polar rule about ``origin`` covering the ball |x - center| <= radius.

    Each ray is integrated by Gauss-Legendre over the segment where it meets
    the ball, so the r^2 Jacobian absorbs 1/|x - origin| and no node straddles
    the ball boundary.  For an origin outside the ball only the cone of rays
    that hit it is sampled.
    """
    o = np.asarray(origin, dtype=float)
    d = o - np.asarray(center, dtype=float)
    dd = float(d @ d)
    if dd < radius ** 2:
        dirs, wa = angular_rule(n_theta)
    else:
        # rays within angle asin(radius/|d|) of the direction towards the centre
        cos_max = math.sqrt(max(1.0 - radius ** 2 / dd, 0.0))
        ct, wt = gauss_legendre(n_theta, cos_max, 1.0)
        n_phi = 2 * n_theta
        phi = 2 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
        st = np.sqrt(1 - ct ** 2)
        local = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                          np.outer(ct, np.ones(n_phi))], axis=-1).reshape(-1, 3)
        dirs = local @ _frame_with_axis(-d).T
        wa = np.outer(wt, np.full(n_phi, 2 * math.pi / n_phi)).ravel()
    b = dirs @ d
    disc = np.sqrt(np.maximum(b * b - dd + radius ** 2, 0.0))
    r_lo = np.maximum(-b - disc, 0.0)
    r_hi = np.maximum(-b + disc, r_lo)
    u, wu = gauss_legendre(n_r, 0.0, 1.0)
    length = r_hi - r_lo
    r = r_lo[None, :] + length[None, :] * u[:, None]
    w = wu[:, None] * length[None, :] * r ** 2 * wa[None, :]
    pts = o + r[..., None] * dirs[None, :, :]
    return Rule(pts.reshape(-1, 3), w.ravel(), f"star(R={radius},n={n_r},{n_theta})")


def sphere_surface_rule(radius: float, n_theta: int = 24) -> tuple[Rule, np.ndarray]:
    """Rule on |x| = R (area element R^2 dOmega) and the outward normals."""
    dirs, w = angular_rule(n_theta)
    return Rule(radius * dirs, w * radius ** 2, f"surface(R={radius})"), dirs


# ---------------------------------------------------------------------------
# S^3


@dataclass(frozen=True)
class S3Rule:
    """Two unit balls: |x| <= 1 in the north chart and |y| < 1 in the south chart.

    Each ball covers one closed hemisphere; the chart weights already carry
    the round volume element tau^-6 = 8 / (1 + r^2)^3.
    """

    north: Rule
    south: Rule

    def chart(self, c: str) -> Rule:
        return self.north if c == "N" else self.south

    @property
    def total_weight(self) -> float:
        return math.fsum(self.north.weights) + math.fsum(self.south.weights)


def s3_rule(n_r: int = 24, n_theta: int = 16) -> S3Rule:
    base = ball_rule(1.0, n_r, n_theta)
    r2 = np.sum(base.points ** 2, axis=-1)
    w = base.weights * 8.0 / (1 + r2) ** 3
    return S3Rule(Rule(base.points, w, "S3[N]"), Rule(base.points.copy(), w.copy(), "S3[S]"))


def integrate_s3(fn_north: Integrand, fn_south: Integrand, rule: S3Rule) -> float:
    return math.fsum([integrate(fn_north, rule.north), integrate(fn_south, rule.south)])
