"""Spectral toolkit on the round S^3: Paneitz eigenvalues, Green's function,
energy, I_4, the constrained invariant nu_p and its variations.

Harmonics.  Degree-k spherical harmonics of S^3 have Laplace eigenvalue
-k(k+2) and multiplicity (k+1)^2; the zonal harmonic about a in R^4 is
z_k^a(q) = U_k(a.q) / (sqrt(2) pi) (Chebyshev U), normalized in L^2 and with
<z_k^a, z_k^b> = U_k(a.b) / (k+1).  A ``SphereExpansion`` stores, per degree,
coefficients on zonal harmonics about a list of axes; this spans every
degree-k harmonic once (k+1)^2 generic axes are used, and it makes the
constrained problem for nu_p exact in closed form (the minimizer is zonal
about p).  ``harmonic_basis`` builds the orthonormal Gram-Schmidt basis used
by the dense cross-check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import digamma, eval_chebyu

from . import jets as J
from .charts import (SphereScalar, SphereTensor, embedding_jets, from_north_tensor, pole_to_sphere,
                     sphere_scalar, to_sphere)
from .curvature import MetricField
from .fields import FieldError, ScalarField, SymTensorField, double_divergence_jet, pullback_theta, push_h
from .jets import Jet
from .quadrature import S3Rule, integrate, integrate_refined, panel_radial_rule, s3_rule

VOLUME = 2 * math.pi ** 2
LAMBDA_1 = -15.0 / 16.0
LAMBDA_2 = 105.0 / 16.0
ZONAL_NORM = math.sqrt(2.0) * math.pi


def sigma(k) -> np.ndarray | float:
    """Eigenvalue of P = Lap^2 + 1/2 Lap - 15/16 on degree-k harmonics."""
    k = np.asarray(k, dtype=float)
    out = k ** 2 * (k + 2) ** 2 - k * (k + 2) / 2 - 15.0 / 16.0
    return float(out) if out.ndim == 0 else out


def multiplicity(k: int) -> int:
    return (k + 1) ** 2


def zonal(k: int, axis, q) -> np.ndarray:
    """z_k^a(q) for ambient unit vectors q (..., 4)."""
    t = np.clip(np.asarray(q, dtype=float) @ np.asarray(axis, dtype=float), -1.0, 1.0)
    return eval_chebyu(k, t) / ZONAL_NORM


def zonal_jet(k: int, axis, P: list[Jet]) -> Jet:
    """z_k^a as a jet, from ambient coordinate jets (Chebyshev recurrence)."""
    t = P[0] * float(axis[0])
    for a in range(1, 4):
        t = t + P[a] * float(axis[a])
    u_prev, u = t * 0.0 + 1.0, 2.0 * t
    if k == 0:
        return u_prev * (1.0 / ZONAL_NORM)
    for _ in range(k - 1):
        u_prev, u = u, 2.0 * t * u - u_prev
    return u * (1.0 / ZONAL_NORM)


def zonal_gram(k: int, axes_a: np.ndarray, axes_b: np.ndarray) -> np.ndarray:
    t = np.clip(np.asarray(axes_a) @ np.asarray(axes_b).T, -1.0, 1.0)
    return eval_chebyu(k, t) / (k + 1)


# ---------------------------------------------------------------------------
# Green's function


def green_eval(x, y) -> np.ndarray:
    """G(x, y) = -(1/4pi) |x - y| / (sqrt(|x|^2+1) sqrt(|y|^2+1)) in the north chart."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    d = np.linalg.norm(x - y, axis=-1)
    return -d / (4 * math.pi * np.sqrt(np.sum(x * x, -1) + 1) * np.sqrt(np.sum(y * y, -1) + 1))


def green_north_eval(x) -> np.ndarray:
    """G_N(x) = -(1/4pi) / sqrt(|x|^2 + 1) (the pole at infinity of the chart)."""
    x = np.asarray(x, dtype=float)
    return -1.0 / (4 * math.pi * np.sqrt(np.sum(x * x, -1) + 1))


def green_ambient(p, q) -> np.ndarray:
    """G(p, q) = -|p - q| / (8 pi) for ambient points."""
    return -np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(q, dtype=float), axis=-1) / (8 * math.pi)


def green_spectral(p, q, kmax: int = 2000) -> np.ndarray:
    """sum_k Z_k(p, q) / sigma_k truncated at kmax, for paired points (error O(1/kmax) off the diagonal)."""
    t = np.clip(np.sum(np.asarray(p, dtype=float) * np.asarray(q, dtype=float), axis=-1), -1.0, 1.0)
    out = np.zeros_like(np.asarray(t, dtype=float))
    for k in range(kmax + 1):
        out = out + (k + 1) * eval_chebyu(k, t) / (VOLUME * sigma(k))
    return out


def green_sphere(pole="N") -> SphereScalar:
    p = pole_to_sphere(pole)
    return sphere_scalar(lambda P: _chord_jet(P, p) * (-1.0 / (8 * math.pi)), name="G")


def _chord_jet(P: list[Jet], p: np.ndarray) -> Jet:
    d2 = (P[0] - p[0]) * (P[0] - p[0])
    for a in range(1, 4):
        d2 = d2 + (P[a] - p[a]) * (P[a] - p[a])
    return d2.sqrt()


def green_l2_norm(rule: S3Rule | None = None, pole="N") -> float:
    """(int G_p^2 dmu)^1/2 by two-chart quadrature."""
    rule = rule or s3_rule(32, 24)
    p = pole_to_sphere(pole)
    total = 0.0
    parts = []
    for chart in ("N", "S"):
        def f(x, chart=chart):
            return green_ambient(to_sphere(x, chart), p) ** 2
        parts.append(integrate(f, rule.chart(chart)))
    total = math.fsum(parts)
    return math.sqrt(total)


# tail sums over k > L of sigma-weighted zonal norms

def _partial_fraction_tail(L: int, power: int) -> float:
    """sum_{k>L} (k+1)^2 / (2 pi^2 sigma_k^power) for power 1 (closed form) or 2 (summed)."""
    if power == 1:
        # m^2 / sigma = -(1/8)/(m^2 - 1/4) + (9/8)/(m^2 - 9/4), m = k + 1
        M = L + 1

        def tail(c):
            return (digamma(M + 1 + c) - digamma(M + 1 - c)) / (2 * c)

        return float((-0.125 * tail(0.5) + 1.125 * tail(1.5)) / VOLUME)
    k = np.arange(L + 1, L + 1 + 200000, dtype=float)
    s = (k + 1) ** 2 / (VOLUME * sigma(k) ** 2)
    rest = 1.0 / (3 * VOLUME * (L + 200001.0) ** 5)  # integral bound of m^-6 m^2
    return float(math.fsum(s[::-1]) + rest)


def green_diagonal_partial(L: int) -> float:
    """sum_{k<=L} (k+1)^2 / (2 pi^2 sigma_k); the full sum is G(p, p) = 0."""
    k = np.arange(L + 1)
    return float(math.fsum((k + 1) ** 2 / (VOLUME * sigma(k))))


# ---------------------------------------------------------------------------
# expansions


@dataclass(frozen=True, eq=False)
class GreenTail:
    """The function T(q) = sum_{k>L} Z_k(p, q) / sigma_k (Green's function minus its truncation)."""

    pole: np.ndarray
    L: int

    def same(self, other: "GreenTail | None") -> bool:
        return other is not None and self.L == other.L and bool(np.allclose(self.pole, other.pole))

    @property
    def norm2(self) -> float:
        return _partial_fraction_tail(self.L, 2)

    @property
    def energy(self) -> float:
        return _partial_fraction_tail(self.L, 1)

    def __call__(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        out = green_ambient(q, self.pole)
        t = np.clip(q @ self.pole, -1.0, 1.0)
        for k in range(self.L + 1):
            out = out - (k + 1) * eval_chebyu(k, t) / (VOLUME * sigma(k))
        return out


@dataclass(frozen=True)
class SphereExpansion:
    """sum_k sum_j coeffs[k][j] z_k^{axes[k][j]}  (+ tail_coeff * GreenTail)."""

    axes: dict[int, np.ndarray] = field(default_factory=dict)
    coeffs: dict[int, np.ndarray] = field(default_factory=dict)
    tail: GreenTail | None = None
    tail_coeff: float = 0.0

    @property
    def degree(self) -> int:
        return max(self.axes) if self.axes else -1

    @staticmethod
    def constant(c: float = 1.0) -> "SphereExpansion":
        return SphereExpansion({0: np.array([[0, 0, 0, 1.0]])}, {0: np.array([c * ZONAL_NORM])})

    @staticmethod
    def zonal(k: int, axis, c: float = 1.0) -> "SphereExpansion":
        a = np.asarray(axis, dtype=float)
        return SphereExpansion({k: a[None] / np.linalg.norm(a)}, {k: np.array([float(c)])})

    @staticmethod
    def green(pole, L: int, enrich: bool = False) -> "SphereExpansion":
        """G_p truncated at degree L (with the exact tail when ``enrich``)."""
        p = pole_to_sphere(pole)
        axes, coeffs = {}, {}
        for k in range(L + 1):
            axes[k] = p[None]
            coeffs[k] = np.array([(k + 1) / (ZONAL_NORM * sigma(k))])
        tail = GreenTail(p, L) if enrich else None
        return SphereExpansion(axes, coeffs, tail, 1.0 if enrich else 0.0)

    def _terms(self):
        for k in sorted(self.axes):
            yield k, self.axes[k], self.coeffs[k]

    def __call__(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        out = np.zeros(q.shape[:-1])
        for k, ax, c in self._terms():
            t = np.clip(q @ ax.T, -1.0, 1.0)
            out = out + eval_chebyu(k, t) @ c / ZONAL_NORM
        if self.tail is not None and self.tail_coeff != 0:
            out = out + self.tail_coeff * self.tail(q)
        return out

    def __add__(self, other: "SphereExpansion") -> "SphereExpansion":
        axes, coeffs = dict(self.axes), dict(self.coeffs)
        for k, ax, c in other._terms():
            if k in axes:
                axes[k] = np.concatenate([axes[k], ax])
                coeffs[k] = np.concatenate([coeffs[k], c])
            else:
                axes[k], coeffs[k] = ax, c
        if self.tail is not None and other.tail is not None and not self.tail.same(other.tail):
            raise FieldError("cannot add expansions with different Green tails")
        tail = self.tail or other.tail
        return SphereExpansion(axes, coeffs, tail, self.tail_coeff + other.tail_coeff)

    def __rmul__(self, s: float) -> "SphereExpansion":
        return SphereExpansion(self.axes, {k: s * c for k, c in self.coeffs.items()}, self.tail,
                               s * self.tail_coeff)

    def degree_part(self, k: int) -> "SphereExpansion":
        if k not in self.axes:
            return SphereExpansion()
        return SphereExpansion({k: self.axes[k]}, {k: self.coeffs[k]})

    def as_sphere_scalar(self) -> SphereScalar:
        if self.tail is not None and self.tail_coeff != 0:
            raise FieldError("the Green tail has no jet representation")
        terms = list(self._terms())

        def fn(P):
            out = P[0] * 0.0
            for k, ax, c in terms:
                for a, cc in zip(ax, c):
                    out = out + cc * zonal_jet(k, a, P)
            return out

        return sphere_scalar(fn, "expansion")

    @property
    def truncation_tail(self) -> float:
        """L^2 norm of the part above the stored degrees (the tail function, if any)."""
        if self.tail is None:
            return 0.0
        return abs(self.tail_coeff) * math.sqrt(self.tail.norm2)


def inner(u: SphereExpansion, v: SphereExpansion, weights=None) -> float:
    """<u, v>_{L^2}; with ``weights`` (function of k) the degree-k blocks are scaled."""
    total = []
    for k in set(u.axes) & set(v.axes):
        w = 1.0 if weights is None else float(weights(k))
        total.append(w * float(u.coeffs[k] @ zonal_gram(k, u.axes[k], v.axes[k]) @ v.coeffs[k]))
    if u.tail is not None and v.tail is not None and u.tail_coeff and v.tail_coeff:
        if not u.tail.same(v.tail):
            raise FieldError("Green tails about different poles are not supported")
        t = u.tail.energy if weights is sigma else u.tail.norm2
        if weights is not None and weights is not sigma:
            raise FieldError("weighted inner products with a tail support sigma only")
        total.append(u.tail_coeff * v.tail_coeff * t)
    return math.fsum(total)


def l2_norm(u: SphereExpansion) -> float:
    return math.sqrt(max(inner(u, u), 0.0))


def paneitz_sphere(u: SphereExpansion) -> SphereExpansion:
    """P u: degree-k coefficients multiplied by sigma(k)."""
    if u.tail is not None and u.tail_coeff:
        raise FieldError("P of the Green tail is a distribution; use energy() instead")
    return SphereExpansion(u.axes, {k: sigma(k) * c for k, c in u.coeffs.items()})


def energy_spectral(u: SphereExpansion, v: SphereExpansion) -> float:
    return inner(u, v, weights=sigma)


# ---------------------------------------------------------------------------
# energy and I_4 by quadrature


def _round_geometry(x: np.ndarray, order: int = 4):
    return MetricField.round().geometry(x, order)


def energy_density(u: ScalarField, v: ScalarField, x: np.ndarray) -> np.ndarray:
    """Lap u Lap v - 4 Rc(du, dv) + 5/4 R <du, dv> - 1/2 Q u v on the round metric (chart x)."""
    geo = _round_geometry(x, 4)
    uj, vj = u.jet(x, 2), v.jet(x, 2)
    lu, lv = geo.laplacian(uj).value, geo.laplacian(vj).value
    gi = geo.ginv.value
    du, dv = uj.grad().value, vj.grad().value
    rc = geo.ricci.value
    rc_up = np.einsum("...ia,...ab,...jb->...ij", gi, rc, gi)
    rcuv = np.einsum("...ij,...i,...j->...", rc_up, du, dv)
    guv = np.einsum("...ij,...i,...j->...", gi, du, dv)
    R = geo.scalar.value
    Q = geo.q_curvature.value
    return lu * lv - 4 * rcuv + 1.25 * R * guv - 0.5 * Q * uj.value * vj.value


def s3_integral(fn_chart, rule: S3Rule | None = None) -> float:
    """int_{S^3} f dmu with f given per chart: fn_chart(x, chart) -> values."""
    rule = rule or s3_rule()
    return math.fsum([integrate(lambda x, c=c: fn_chart(x, c), rule.chart(c)) for c in ("N", "S")])


def energy(u, v=None, rule: S3Rule | None = None) -> float:
    """E(u, v): spectral for expansions, quadrature of the integral form for sphere scalars."""
    v = u if v is None else v
    if isinstance(u, SphereExpansion) and isinstance(v, SphereExpansion):
        return energy_spectral(u, v)
    if isinstance(u, SphereExpansion):
        u = u.as_sphere_scalar()
    if isinstance(v, SphereExpansion):
        v = v.as_sphere_scalar()
    if not (isinstance(u, SphereScalar) and isinstance(v, SphereScalar)):
        raise FieldError("energy needs SphereExpansion or SphereScalar arguments")
    return s3_integral(lambda x, c: energy_density(u.chart(c), v.chart(c), x), rule)


def i4_evaluate(u, rule: S3Rule | None = None) -> float:
    """I_4(u) = E(u) ||u^-1||_{L^6}^2 (infinite if u touches zero)."""
    if isinstance(u, SphereExpansion):
        u_s = u.as_sphere_scalar()
        e = energy_spectral(u, u)
    else:
        u_s = u
        e = energy(u_s, u_s, rule)
    rule = rule or s3_rule()
    mins = [float(np.min(u_s.chart(c)(rule.chart(c).points))) for c in ("N", "S")]
    if min(mins) <= 0:
        if min(mins) < 0:
            raise FieldError("I_4 needs a positive function")
        return math.inf
    inv6 = s3_integral(lambda x, c: u_s.chart(c)(x) ** -6.0, rule)
    return e * inv6 ** (1.0 / 3.0)


def green_reproducing_residual(phi: SphereScalar, rule: S3Rule | None = None) -> float:
    """|int G_N P phi dmu - phi(N)| with P the exact curvature Paneitz operator."""
    rule = rule or s3_rule(16, 12)

    def f(x, c):
        geo = _round_geometry(x, 4)
        pphi = geo.paneitz(phi.chart(c).jet(x, 4)).value
        return green_ambient(to_sphere(x, c), np.array([0, 0, 0, 1.0])) * pphi

    val = s3_integral(f, rule)
    return abs(val - float(phi.south(np.zeros((1, 3)))[0]))


# ---------------------------------------------------------------------------
# Moebius covariance of G


@dataclass(frozen=True)
class MoebiusMap:
    """x -> chart(R4 . sphere(lam * O x + b)) on the north chart."""

    lam: float
    O: np.ndarray
    b: np.ndarray
    R4: np.ndarray

    def jets(self, X: list[Jet]) -> list[Jet]:
        Y = [self.lam * (self.O[i, 0] * X[0] + self.O[i, 1] * X[1] + self.O[i, 2] * X[2]) + self.b[i]
             for i in range(3)]
        r2 = Y[0] * Y[0] + Y[1] * Y[1] + Y[2] * Y[2]
        inv = (r2 + 1.0).reciprocal()
        P = [2.0 * Y[a] * inv for a in range(3)] + [(r2 - 1.0) * inv]
        Q = [sum((P[b] * self.R4[a, b] for b in range(1, 4)), P[0] * self.R4[a, 0]) for a in range(4)]
        den = (1.0 - Q[3]).reciprocal()
        return [Q[a] * den for a in range(3)]

    def __call__(self, x) -> np.ndarray:
        X = J.coordinates(np.asarray(x, dtype=float), 0)
        return np.stack([j.value for j in self.jets(X)], axis=-1)

    def conformal_factor(self, x) -> np.ndarray:
        """rho with F^* g = rho^-4 g, from the chart Jacobian |dF| = lambda(x) I."""
        x = np.asarray(x, dtype=float)
        X = J.coordinates(x, 1)
        F = self.jets(X)
        jac = np.stack([f.grad().value for f in F], axis=-2)
        scale = np.sqrt(np.abs(np.linalg.det(jac))) ** (2.0 / 3.0)
        fx = np.stack([f.value for f in F], axis=-1)
        tau_f = np.sqrt((np.sum(fx * fx, -1) + 1) / 2)
        tau_x = np.sqrt((np.sum(x * x, -1) + 1) / 2)
        return tau_f / (tau_x * np.sqrt(scale))


def random_moebius(rng: np.random.Generator) -> MoebiusMap:
    O = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    R4 = np.linalg.qr(rng.normal(size=(4, 4)))[0]
    return MoebiusMap(float(np.exp(rng.uniform(-0.7, 0.7))), O, rng.normal(size=3) * 0.5, R4)


def moebius_covariance_residual(F: MoebiusMap, x: np.ndarray, y: np.ndarray) -> float:
    """max |G(F x, F y) - rho(x)^-1 rho(y)^-1 G(x, y)| over point pairs."""
    lhs = green_eval(F(x), F(y))
    rhs = green_eval(x, y) / (F.conformal_factor(x) * F.conformal_factor(y))
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# nu_p


@dataclass(frozen=True)
class NuSolution:
    nu: float
    u: SphereExpansion
    alpha: float
    L: int
    pole: np.ndarray
    enriched: bool
    constraint_residual: float
    euler_lagrange_residual: float
    green_correlation: float
    raw_nu: float

    def as_dict(self) -> dict:
        return {"nu": self.nu, "alpha": self.alpha, "L": self.L, "pole": [float(v) for v in self.pole],
                "enriched": self.enriched, "constraint_residual": self.constraint_residual,
                "euler_lagrange_residual": self.euler_lagrange_residual,
                "green_correlation": self.green_correlation, "raw_nu": self.raw_nu}


def _secular(L: int, enrich: bool):
    k = np.arange(L + 1)
    w = (k + 1) ** 2 / VOLUME
    s = sigma(k)
    T = _partial_fraction_tail(L, 1) if enrich else 0.0
    M = _partial_fraction_tail(L, 2) if enrich else 0.0

    def f(nu):
        val = math.fsum(w / (s - nu))
        if enrich:
            val += T * T / (T - nu * M)
        return val

    return f, s


def _solve_secular(L: int, enrich: bool) -> float:
    f, s = _secular(L, enrich)
    lo, hi = s[0], s[1]
    eps = 1e-12 * (hi - lo)
    a, b = lo + eps, hi - eps
    fa, fb = f(a), f(b)
    if fa * fb > 0:
        # f is increasing between the poles; a root at 0 is hit exactly by the enriched space
        raise FieldError("no sign change of the secular function between sigma_0 and sigma_1")
    return float(brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))


def nu_solve(p="N", L: int = 30, enrich: bool = True) -> NuSolution:
    """min E(u) / ||u||^2 over the degree <= L space (plus Green tail) subject to u(p) = 0.

    The evaluation functional at p has Riesz representer sum_k Z_k(p, .); the
    constrained minimizer is u = sum_k Z_k(p, .)/(sigma_k - nu) (+ tail term),
    with nu the root of the secular equation in (sigma_0, sigma_1).  The
    orthogonal complement of zonal functions contributes eigenvalues
    sigma_k >= sigma_1, so this root is the minimum.
    """
    if L < 2:
        raise FieldError("nu_solve needs L >= 2")
    pole = pole_to_sphere(p)
    nu = _solve_secular(L, enrich)
    raw = nu if not enrich else _solve_secular(L, False)
    if not (LAMBDA_1 - 1e-12 <= nu <= LAMBDA_2 + 1e-12):
        raise FieldError(f"nu = {nu} violates the eigenvalue bracket")
    axes, coeffs = {}, {}
    for k in range(L + 1):
        axes[k] = pole[None]
        coeffs[k] = np.array([(k + 1) / (ZONAL_NORM * (sigma(k) - nu))])
    tail, tc = None, 0.0
    if enrich:
        tail = GreenTail(pole, L)
        T, M = tail.energy, tail.norm2
        # minimizing over the tail direction: c_T (T - nu M) = T (the Lagrange condition)
        tc = T / (T - nu * M)
    u = SphereExpansion(axes, coeffs, tail, tc)
    norm = l2_norm(u)
    u = (1.0 / norm) * u
    # sign: follow 4 G_p (negative away from p)
    g = SphereExpansion.green(pole, L, enrich)
    corr = inner(u, g) / (l2_norm(g) * l2_norm(u))
    if corr < 0:
        u = -1.0 * u
        corr = -corr
    # orientation so that u ~ 4 G_p with ||u|| = 1 -> alpha from pairing against harmonics
    alpha = _alpha_from_harmonics(u, nu, pole)
    constraint = abs(float(u(pole[None])[0]))
    el = _euler_lagrange_residual(u, nu, alpha, pole, L)
    return NuSolution(nu, u, alpha, L, pole, enrich, constraint, el, corr, raw)


def _alpha_from_harmonics(u: SphereExpansion, nu: float, pole: np.ndarray, kmax: int = 3) -> float:
    """Least squares for alpha in <u, (P - nu) phi> = alpha phi(p) over phi = z_k^p, k <= kmax."""
    lhs, rhs = [], []
    for k in range(kmax + 1):
        phi = SphereExpansion.zonal(k, pole)
        lhs.append(float(phi(pole[None])[0]))
        rhs.append((sigma(k) - nu) * inner(u, phi))
    lhs, rhs = np.array(lhs), np.array(rhs)
    return float(lhs @ rhs / (lhs @ lhs))


def _euler_lagrange_residual(u: SphereExpansion, nu: float, alpha: float, pole: np.ndarray, L: int) -> float:
    """max over zonal test harmonics k <= L of |<u, (P - nu) z_k^p> - alpha z_k^p(p)| / (k+1)^2.

    The (k+1)^-2 weight is the truncated dual (H^-2) norm of the degree-k test function.
    """
    worst = 0.0
    for k in range(L + 1):
        phi = SphereExpansion.zonal(k, pole)
        r = (sigma(k) - nu) * inner(u, phi) - alpha * float(phi(pole[None])[0])
        worst = max(worst, abs(r) / (k + 1) ** 2)
    return worst


NU_TEXT = "nu_solution.json"
NU_BLOB = "nu_coefficients.bin"
NU_SCHEMA = "paneitzlab-nu/1"


def write_nu_solution(sol: NuSolution, out_dir: str | Path) -> list[Path]:
    """Structured text (nu, alpha, L, residuals) plus the zonal coefficients as little-endian float64.

    The blob holds the degree 0..L coefficients on z_k^p followed by the tail coefficient.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    coeffs = np.array([sol.u.coeffs[k][0] for k in range(sol.L + 1)] + [sol.u.tail_coeff], dtype="<f8")
    meta = {"schema": NU_SCHEMA, **sol.as_dict(), "coefficients": NU_BLOB, "n_coefficients": len(coeffs)}
    text, blob = out / NU_TEXT, out / NU_BLOB
    text.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    blob.write_bytes(coeffs.tobytes())
    return [text, blob]


def read_nu_solution(out_dir: str | Path) -> NuSolution:
    out = Path(out_dir)
    try:
        meta = json.loads((out / NU_TEXT).read_text())
        coeffs = np.frombuffer((out / NU_BLOB).read_bytes(), dtype="<f8")
    except (OSError, ValueError) as exc:
        raise FieldError(f"cannot read nu solution in {out}: {exc}") from exc
    if meta.get("schema") != NU_SCHEMA or len(coeffs) != meta["L"] + 2:
        raise FieldError(f"{out}: not a nu solution of schema {NU_SCHEMA}")
    pole, L = np.array(meta["pole"]), int(meta["L"])
    axes = {k: pole[None] for k in range(L + 1)}
    cs = {k: coeffs[k:k + 1].copy() for k in range(L + 1)}
    tail = GreenTail(pole, L) if meta["enriched"] else None
    u = SphereExpansion(axes, cs, tail, float(coeffs[-1]))
    return NuSolution(meta["nu"], u, meta["alpha"], L, pole, meta["enriched"], meta["constraint_residual"],
                      meta["euler_lagrange_residual"], meta["green_correlation"], meta["raw_nu"])


def nu_unconstrained(L: int = 30) -> float:
    return float(min(sigma(np.arange(L + 1))))


# dense cross-check -----------------------------------------------------------


def s3_product_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Ambient points and weights exact for polynomials of degree < 2n - 1 on S^3."""
    j = np.arange(1, n + 1)
    c = np.cos(j * math.pi / (n + 1))  # Gauss-Chebyshev (2nd kind) nodes in cos chi
    wc = math.pi / (n + 1) * np.sin(j * math.pi / (n + 1)) ** 2
    ct, wt = np.polynomial.legendre.leggauss(n)
    nphi = 2 * n
    phi = 2 * math.pi * np.arange(nphi) / nphi
    C, T, F = np.meshgrid(c, ct, phi, indexing="ij")
    W = np.einsum("a,b->ab", wc, wt)[..., None] * (2 * math.pi / nphi) * np.ones(nphi)
    sc, st = np.sqrt(1 - C ** 2), np.sqrt(1 - T ** 2)
    pts = np.stack([sc * st * np.cos(F), sc * st * np.sin(F), sc * T, C], axis=-1)
    return pts.reshape(-1, 4), W.ravel()


def _monomials4(k: int) -> list[tuple[int, int, int, int]]:
    out = []
    for a in range(k, -1, -1):
        for b in range(k - a, -1, -1):
            for c in range(k - a - b, -1, -1):
                out.append((a, b, c, k - a - b - c))
    return out


@dataclass(frozen=True)
class HarmonicBasis:
    degrees: np.ndarray  # degree of each basis function
    values: np.ndarray  # (n_basis, n_points) on the product rule
    points: np.ndarray
    weights: np.ndarray
    exponents: list  # per degree: monomial exponent list
    transforms: list  # per degree: (n_mono_total_up_to_k?) coefficient matrices


def harmonic_basis(L: int, tol: float = 1e-9) -> HarmonicBasis:
    """Orthonormal harmonics up to degree L by Gram-Schmidt on lexicographic monomials.

    Degree-k monomials restricted to S^3 span H_k + H_{k-2} + ...; orthogonalizing
    them against all lower-degree functions leaves exactly the (k+1)^2 functions of H_k.
    """
    pts, w = s3_product_rule(L + 2)
    basis, degs = [], []
    for k in range(L + 1):
        found = []
        for e in _monomials4(k):
            f = np.prod([pts[:, a] ** e[a] for a in range(4)], axis=0)
            for _ in range(2):  # re-orthogonalize for stability
                for b in basis + found:
                    f = f - (f * b) @ w * b
            n = math.sqrt(max((f * f) @ w, 0.0))
            if n > tol:
                found.append(f / n)
        if len(found) != multiplicity(k):
            raise FieldError(f"degree {k}: found {len(found)} harmonics, expected {multiplicity(k)}")
        basis += found
        degs += [k] * len(found)
    return HarmonicBasis(np.array(degs), np.array(basis), pts, w, [], [])


def nu_dense(p, L: int) -> float:
    """Constrained minimum in the full harmonic basis (no zonal reduction)."""
    hb = harmonic_basis(L)
    pole = pole_to_sphere(p)
    # evaluation functional: basis values at p by exact interpolation (least squares on the rule)
    e = _basis_at(hb, pole)
    # orthonormal basis of the complement of the Riesz representer e
    _, _, vt = np.linalg.svd(e[None, :])
    Q = vt[1:].T
    A = Q.T @ np.diag(sigma(hb.degrees)) @ Q
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


def _basis_at(hb: HarmonicBasis, q: np.ndarray) -> np.ndarray:
    """Basis values at q via the reproducing kernel: Y_i(q) = sum_k <Y_i, Z_k(q, .)>."""
    t = np.clip(hb.points @ q, -1.0, 1.0)
    out = np.zeros(len(hb.degrees))
    for k in range(int(hb.degrees.max()) + 1):
        zk = (k + 1) * eval_chebyu(k, t) / VOLUME
        sel = hb.degrees == k
        out[sel] = hb.values[sel] @ (zk * hb.weights)
    return out


# ---------------------------------------------------------------------------
# moving a pole to N


def reflection_to_north(p) -> np.ndarray:
    """An orthogonal map of R^4 (a reflection, or I) sending N to p."""
    p = pole_to_sphere(p)
    v = NORTH4 - p
    n = float(np.linalg.norm(v))
    if n < 1e-14:
        return np.eye(4)
    v = v / n
    return np.eye(4) - 2.0 * np.outer(v, v)


NORTH4 = np.array([0.0, 0.0, 0.0, 1.0])


def isometry_pullback(h: SphereTensor, R4: np.ndarray) -> SphereTensor:
    """Phi^* h for the round isometry Phi(q) = R4 q, chart by chart."""
    R4 = np.asarray(R4, dtype=float)

    def make(chart):
        def evaluator(x, k):
            X = J.coordinates(x, k + 1)  # one extra order: the Jacobian loses one
            P = embedding_jets(X, chart)
            Q = [sum((P[b] * R4[a, b] for b in range(1, 4)), P[0] * R4[a, 0]) for a in range(4)]
            q4 = Q[3].value
            out = Jet.zeros(x.shape[:-1] + (3, 3), k)
            for target, sel in (("N", q4 <= 0), ("S", q4 > 0)):
                if not np.any(sel):
                    continue
                Qs = [Jet(q.c[sel], k + 1) for q in Q]
                den = (1.0 - Qs[3]) if target == "N" else (1.0 + Qs[3])
                inv = den.reciprocal()
                F = [Qs[a] * inv for a in range(3)]
                f0 = np.stack([f.value for f in F], axis=-1)
                hf = J.compose(h.chart(target).jet(f0, k), [f.truncate(k) for f in F])
                jac = J.stack([f.grad() for f in F], axis=-2)  # [a, i] = d F_a / d x_i
                t = J.einsum("ai,ab->ib", jac, hf)
                out.c[sel] = J.einsum("ib,bj->ij", t, jac).c
            return out

        return SymTensorField(evaluator, -4.0, max(h.north.derivative_order_available - 1, 0),
                              f"pull({h.name})[{chart}]", True)

    return SphereTensor(make("N"), make("S"), f"pull({h.name})")


def move_pole_to_north(h: SphereTensor, p) -> SphereTensor:
    """A tensor whose behaviour at N is that of h at p (pullback by an isometry)."""
    return h if np.allclose(pole_to_sphere(p), NORTH4) else isometry_pullback(h, reflection_to_north(p))


# ---------------------------------------------------------------------------
# first variation of nu


ASSEMBLY_PANELS = (0.5, 1.0, 2.0, 4.0, 8.0)
ASSEMBLY_LEVELS = ((10, 12), (14, 18))
NU1_FROM_FLUX = -16.0  # nu^(1) = 16 int G_N P^(1) G_N = -16 I(N, N, h)


@dataclass(frozen=True)
class NuFirstVariation:
    value: float  # flux route
    volume: float  # volume-integral route
    flux: "object"
    scale: float

    @property
    def route_gap(self) -> float:
        return abs(self.value - self.volume)

    def as_dict(self) -> dict:
        return {"value": self.value, "volume": self.volume, "scale": self.scale,
                "flux_radii": list(self.flux.radii), "fluxes": list(self.flux.fluxes)}


def nu_first_variation(h: SphereTensor, p="N", radii=None, volume_levels=((10, 12), (14, 16))) -> NuFirstVariation:
    """nu^(1)(p, h) = int u_p P^(1) u_p dmu with u_p = 4 G_p, in the flat chart of p.

    Flux route: -16 times the extrapolated boundary flux.  Volume route:
    (1/16 pi^2) int_{R^3} Lap s dx on a panel rule (Lap s = O(|x|^-5) is integrable).
    """
    from .variation import FLUX_RADII, first_variation_pole

    theta = pullback_theta(move_pole_to_north(h, p).north)
    flux = first_variation_pole(theta, radii or FLUX_RADII)

    def lap_s(x):
        d2 = double_divergence_jet(theta.jet(x, 4)).grad().grad()
        return J.einsum("kk->", d2).value

    vol = integrate_refined(lap_s, lambda i: panel_radial_rule(ASSEMBLY_PANELS, *volume_levels[i]),
                            tuple(range(len(volume_levels))))
    return NuFirstVariation(NU1_FROM_FLUX * flux.value, vol.value / (16 * math.pi ** 2), flux, flux.scale)


# ---------------------------------------------------------------------------
# second variation of nu

EPSTEIN_ZETA_1 = -2.8372974794806  # sum over Z^3 \ 0 of |j|^-1, analytically continued


@dataclass(frozen=True)
class NewtonPotential:
    """N(x) = int s(y) / |x - y| dy from samples of s on a cube grid.

    Zero-padded FFT convolution (the lattice sum, with the corrected weight
    -zeta(1) h^2 at the singular node), one Richardson step against the 2h grid,
    cubic interpolation inside the cube and a quadrupole expansion outside.
    """

    axis: np.ndarray
    fine: object
    coarse: object
    monopole: float
    dipole: np.ndarray
    quadrupole: np.ndarray
    samples: np.ndarray

    @staticmethod
    def lattice_sum(values: np.ndarray, h: float) -> np.ndarray:
        n = values.shape[0]
        m = 2 * n
        i = np.arange(m)
        d = np.where(i < n, i, i - m) * h
        r = np.sqrt(d[:, None, None] ** 2 + d[None, :, None] ** 2 + d[None, None, :] ** 2)
        r[0, 0, 0] = 1.0
        K = 1.0 / r
        K[0, 0, 0] = -EPSTEIN_ZETA_1 / h
        pad = np.zeros((m, m, m))
        pad[:n, :n, :n] = values
        axes = (0, 1, 2)
        out = np.fft.irfftn(np.fft.rfftn(pad, axes=axes) * np.fft.rfftn(K, axes=axes), s=(m, m, m), axes=axes)
        return out[:n, :n, :n] * h ** 3

    @classmethod
    def from_function(cls, s_fn, radius: float = 8.0, spacing: float = 0.25, chunk: int = 20000):
        from scipy.interpolate import RegularGridInterpolator

        n = int(round(2 * radius / spacing))
        if n % 2:
            n += 1
        x = np.linspace(-radius, radius, n + 1)
        h = x[1] - x[0]
        pts = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
        vals = np.concatenate([np.asarray(s_fn(pts[i:i + chunk])) for i in range(0, len(pts), chunk)])
        S = vals.reshape((n + 1,) * 3)
        Nh = cls.lattice_sum(S, h)
        N2 = cls.lattice_sum(S[::2, ::2, ::2], 2 * h)
        corr = (Nh[::2, ::2, ::2] - N2) / 15.0
        fine = RegularGridInterpolator((x, x, x), Nh, method="cubic")
        xc = x[::2]
        coarse = RegularGridInterpolator((xc, xc, xc), corr, method="cubic")
        w = h ** 3
        r2 = np.sum(pts * pts, axis=-1)
        mono = w * math.fsum(vals)
        dip = w * vals @ pts
        quad = w * (3 * np.einsum("n,ni,nj->ij", vals, pts, pts) - np.eye(3) * (vals @ r2))
        return cls(x, fine, coarse, mono, dip, quad, vals)

    @property
    def spacing(self) -> float:
        return float(self.axis[1] - self.axis[0])

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        lim = self.axis[-1] - 3 * self.spacing
        inside = np.all(np.abs(p) <= lim, axis=-1)
        out = np.empty(p.shape[:-1])
        if np.any(inside):
            out[inside] = self.fine(p[inside]) + self.coarse(p[inside])
        q = p[~inside]
        if q.size:
            r = np.linalg.norm(q, axis=-1)
            out[~inside] = (self.monopole / r + q @ self.dipole / r ** 3
                            + 0.5 * np.einsum("ni,ij,nj->n", q, self.quadrupole, q) / r ** 5)
        return out


@dataclass(frozen=True)
class NuSecondVariation:
    value: float  # -16 II(N, N, h)
    ii: float
    assembly: float | None = None
    terms: tuple[float, ...] = ()
    assembly_error: float = 0.0

    @property
    def relative_gap(self) -> float:
        if self.assembly is None:
            return math.nan
        return abs(self.assembly - self.value) / max(abs(self.value), 1e-300)

    def as_dict(self) -> dict:
        return {"value": self.value, "ii": self.ii, "assembly": self.assembly, "terms": list(self.terms),
                "assembly_error": self.assembly_error}


def nu_second_variation(h, p="N", assemble: bool = False, cutoff_radius: float | None = None,
                        cfg=None, newton_radius: float = 8.0, newton_spacing: float = 0.25,
                        s3: S3Rule | None = None) -> NuSecondVariation:
    """nu^(2)(p, h) = -16 II(p, p, h), optionally cross-assembled term by term.

    ``h`` is a SphereTensor (gauged here) or an already gauged chart tensor theta
    at p = N.  The assembly uses P^(2) 1 and P^(1) 1 of the flat chart, the first
    variation u^(1) through the Newton potential of s, and the trace term; it needs
    a rapidly decaying theta because it differentiates theta four times.
    """
    from . import expansion as E
    from .variation import DEFAULT_CUTOFF_RADIUS, DEFAULT_QUADRATURE, gauge_normalize, green_weighted_constant, ii_quadform

    if isinstance(h, SymTensorField):
        if not np.allclose(pole_to_sphere(p), NORTH4):
            raise FieldError("a chart tensor theta is only meaningful at p = N")
        theta = h
        sphere_h = from_north_tensor(push_h(theta)) if theta.decay_exponent == -math.inf else None
        cfg = cfg or DEFAULT_QUADRATURE
    else:
        sol = gauge_normalize(move_pole_to_north(h, p), cutoff_radius or DEFAULT_CUTOFF_RADIUS)
        theta, sphere_h = sol.theta, sol.gauged
        cfg = cfg or sol.quadrature
        if sol.residual == 0.0 and np.all(sol.alpha1 == 0) and np.all(sol.alpha2.coeffs == 0):
            base = pullback_theta(sol.gauged.north)
            theta = base if base.decay_exponent == -math.inf else theta
    ii = ii_quadform(theta, cfg)
    if not assemble:
        return NuSecondVariation(-16.0 * ii, ii)
    if theta.decay_exponent != -math.inf or sphere_h is None:
        raise FieldError("the term-by-term assembly needs a rapidly decaying gauged theta")
    newton = NewtonPotential.from_function(lambda x: double_divergence_jet(theta.jet(x, 2)).value,
                                           newton_radius, newton_spacing)
    pts = np.stack(np.meshgrid(newton.axis, newton.axis, newton.axis, indexing="ij"), -1).reshape(-1, 3)
    r2 = np.sum(pts * pts, axis=-1)
    c_s = newton.spacing ** 3 * float(newton.samples @ (2 / np.sqrt(r2 + 1) + (r2 + 1) ** -1.5))
    c_h = green_weighted_constant(sphere_h, s3 or s3_rule(20, 16))
    c = -1.0 / (4 * math.pi * math.sqrt(2))  # tau G_N
    k1 = -1.0 / (256 * math.pi ** 2 * math.sqrt(2))
    flat = MetricField.euclidean()
    one = ScalarField.constant(1.0)

    def parts(x):
        d = E.FrameData(flat, theta, x)
        p2 = E._total(E.p2_one_groups(d))
        p1 = E._total(E.p1_groups(d.with_phi(one)))
        tr = np.trace(d.hc.value, axis1=-2, axis2=-1)
        tau_i = k1 * (2 * newton(x) - c_s) + c * c_h  # tau I(N, x, h)
        return np.stack([p2 / (2 * math.pi ** 2), 16 * c * tau_i * p1, p1 * tr / (4 * math.pi ** 2)], -1)

    levels = []
    for lev in ASSEMBLY_LEVELS:
        rule = panel_radial_rule(ASSEMBLY_PANELS, *lev)
        vals = np.concatenate([parts(rule.points[i:i + 5000]) for i in range(0, len(rule), 5000)])
        levels.append(np.array([math.fsum(v) for v in (vals * rule.weights[:, None]).T]))
    terms = tuple(float(t) for t in levels[-1])
    total = math.fsum(terms)
    err = abs(total - math.fsum(levels[0]))
    return NuSecondVariation(-16.0 * ii, ii, total, terms, err)
