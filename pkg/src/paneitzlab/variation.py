"""First and second variation of the Green's function pole value on S^3.

Everything is expressed in the north stereographic chart x through
theta = tau^4 h.  The scalar s = theta_ijij - Lap tr theta and the matrix
M = lichnerowicz combination carry all of the flat-chart formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import jets as J
from .charts import SphereTensor, SphereVector, invert_tensor, invert_vector
from .curvature import MetricField
from .fields import (FieldError, ScalarField, SymTensorField, VectorFieldChart, decay_audit,
                     double_divergence_jet, lichnerowicz_jet, pullback_theta, lie_derivative_round,
                     tau_jet)
from .jets import Jet
from .quadrature import (Integral, Rule, angular_rule, ball_rule, cube_rule, gauss_legendre, integrate,
                         integrate_refined, panel_radial_rule, radial_rule, s3_rule, S3Rule, sphere_surface_rule,
                         star_rule)
from .symbol import GridTensor, frequencies, spectral_divergence

II_PREFACTOR = -1.0 / (128.0 * math.pi ** 2)
FLUX_PREFACTOR = -1.0 / (256.0 * math.pi ** 2)
FLUX_RADII = (8.0, 16.0, 32.0, 64.0, 128.0, 256.0)
INTEGRABLE_DECAY = 0.5  # sum M^2 ~ |x|^(2a - 4) is integrable for a < 1/2


# ---------------------------------------------------------------------------
# second variation


def ii_integrand(theta_jet: Jet) -> np.ndarray:
    M = lichnerowicz_jet(theta_jet).value
    s = double_divergence_jet(theta_jet).value
    return np.sum(M * M, axis=(-2, -1)) - 1.5 * s * s


def ii_bilinear_integrand(a: Jet, b: Jet) -> np.ndarray:
    Ma, Mb = lichnerowicz_jet(a).value, lichnerowicz_jet(b).value
    sa, sb = double_divergence_jet(a).value, double_divergence_jet(b).value
    return np.sum(Ma * Mb, axis=(-2, -1)) - 1.5 * sa * sb


@dataclass(frozen=True)
class QuadratureConfig:
    """``method``: "auto" (cube for rapidly decaying theta, panels otherwise), "cube" or "panels"."""

    cube_radius: float = 12.0
    cube_points: int = 96
    panel_breaks: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0, 8.0)
    panel_levels: tuple[tuple[int, int], ...] = ((12, 16), (20, 24))
    method: str = "auto"
    panel_center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @staticmethod
    def compact(radius: float, center=(0.0, 0.0, 0.0)) -> "QuadratureConfig":
        """Panels centred on a ball of support, refined towards its boundary."""
        breaks = tuple(radius * f for f in (0.25, 0.5, 0.7, 0.85, 0.95, 1.0))
        return QuadratureConfig(panel_breaks=breaks, panel_levels=((16, 16), (24, 24)), method="panels",
                                panel_center=tuple(float(c) for c in center))


DEFAULT_QUADRATURE = QuadratureConfig()


def _check_decay(*thetas: SymTensorField) -> float:
    a = max(t.decay_exponent for t in thetas)
    if not a < INTEGRABLE_DECAY:
        raise FieldError(f"decay exponent {a} too slow: the second-variation integrand is not integrable")
    return a


def _evaluate(integrand, decay: float, cfg: QuadratureConfig) -> Integral:
    if cfg.method not in ("auto", "cube", "panels"):
        raise FieldError(f"unknown quadrature method {cfg.method!r}")
    if cfg.method == "cube" and decay != -math.inf:
        raise FieldError("the cube rule needs a rapidly decaying integrand")
    if cfg.method == "cube" or (cfg.method == "auto" and decay == -math.inf):
        rule = cube_rule(cfg.cube_radius, cfg.cube_points)
        value = integrate(integrand, rule)
        # tail: integrand level on the faces of the cube times the volume outside a shell
        face = np.array([[cfg.cube_radius, 0, 0], [0, cfg.cube_radius, 0], [0, 0, cfg.cube_radius],
                         [-cfg.cube_radius, 0, 0], [0, -cfg.cube_radius, 0], [0, 0, -cfg.cube_radius]])
        tail = float(np.max(np.abs(integrand(face)))) * (2 * cfg.cube_radius) ** 3
        return Integral(value, 0.0, tail, (value,))
    levels = cfg.panel_levels

    def make(level):
        return panel_radial_rule(cfg.panel_breaks, *levels[level], center=cfg.panel_center)

    return integrate_refined(integrand, make, tuple(range(len(levels))))


def ii_evaluate(theta: SymTensorField, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> Integral:
    """II(N, N, h) with quadrature error estimate and tail bound."""
    decay = _check_decay(theta)
    raw = _evaluate(lambda x: ii_integrand(theta.jet(x, 2)), decay, cfg)
    return Integral(II_PREFACTOR * raw.value, abs(II_PREFACTOR) * raw.quadrature_error,
                    abs(II_PREFACTOR) * raw.tail_bound, tuple(II_PREFACTOR * v for v in raw.levels))


def ii_quadform(theta: SymTensorField, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    return ii_evaluate(theta, cfg).value


def ii_bilinear(theta: SymTensorField, kappa: SymTensorField, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    decay = _check_decay(theta, kappa)
    raw = _evaluate(lambda x: ii_bilinear_integrand(theta.jet(x, 2), kappa.jet(x, 2)), decay, cfg)
    return II_PREFACTOR * raw.value


def grid_ii_quadform(theta: GridTensor) -> float:
    """Real-space II on a periodic grid with spectral derivatives."""
    from .symbol import spectral_ii_integrand

    return II_PREFACTOR * math.fsum(spectral_ii_integrand(theta).ravel()) * theta.grid.cell_volume


def l2_norm_squared(theta: SymTensorField, cfg: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    decay = max(theta.decay_exponent, -math.inf)
    if not decay < -1.5:
        raise FieldError("theta is not square integrable")
    return _evaluate(lambda x: np.sum(theta(x) ** 2, axis=(-2, -1)), decay, cfg).value


# ---------------------------------------------------------------------------
# first variation


def c4_norm(theta: SymTensorField, radii=(0.0, 0.5, 1.0, 2.0, 4.0, 8.0)) -> float:
    """max over sample points of |d^m theta_ij|, m <= 4 (rays through the origin)."""
    from .fields import ray_directions

    pts = np.concatenate([r * ray_directions() for r in radii])
    jet = theta.jet(pts, 4)
    w = np.array([float(np.prod([math.factorial(v) for v in a])) for a in J.monomials(4)])
    return float(np.max(np.abs(jet.c * w)))


@dataclass(frozen=True)
class FluxResult:
    value: float
    radii: tuple[float, ...]
    fluxes: tuple[float, ...]
    extrapolation_error: float
    scale: float = 1.0

    def as_dict(self) -> dict:
        return {"value": self.value, "radii": list(self.radii), "fluxes": list(self.fluxes),
                "extrapolation_error": self.extrapolation_error, "scale": self.scale}


def extrapolate_inverse_r(radii, values, degree: int = 3) -> tuple[float, float]:
    """Limit R -> inf of a + b/R + c/R^2 + ...; error from dropping the smallest radius."""
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    deg = min(degree, len(r) - 1)
    a = float(np.polyfit(1.0 / r, v, deg)[-1])
    if len(r) > deg + 1:
        b = float(np.polyfit(1.0 / r[1:], v[1:], deg)[-1])
    else:
        b = float(np.polyfit(1.0 / r[1:], v[1:], deg - 1)[-1]) if deg > 1 else v[-1]
    return a, abs(a - b)


def _s_gradient(theta: SymTensorField, x: np.ndarray) -> np.ndarray:
    return double_divergence_jet(theta.jet(x, 3)).grad().value


def boundary_flux(theta: SymTensorField, radius: float, n_theta: int = 24) -> float:
    """-(1/256 pi^2) int_{|x|=R} d_k s x_k / R dS."""
    rule, normals = sphere_surface_rule(radius, n_theta)
    return FLUX_PREFACTOR * integrate(
        lambda x: np.sum(_s_gradient(theta, x) * x, axis=-1) / radius, rule)


def first_variation_pole(theta: SymTensorField, radii=FLUX_RADII, n_theta: int = 24) -> FluxResult:
    """I(N, N, h) as the R -> inf limit of the boundary flux."""
    if theta.decay_exponent > 0:
        raise FieldError("theta must be bounded at infinity (decay exponent <= 0)")
    fluxes = [boundary_flux(theta, R, n_theta) for R in radii]
    value, err = extrapolate_inverse_r(radii, fluxes)
    return FluxResult(value, tuple(radii), tuple(fluxes), err, c4_norm(theta))


def laplacian_s_ball(theta: SymTensorField, radius: float, n_r: int = 48, n_theta: int = 24) -> float:
    """int_{|x|<=R} Lap s dx by volume quadrature."""
    rule = ball_rule(radius, n_r, n_theta)

    def f(x):
        d2 = double_divergence_jet(theta.jet(x, 4)).grad().grad()
        return J.einsum("kk->", d2).value

    return integrate(f, rule)


# ---------------------------------------------------------------------------
# S^3 integrals and the off-diagonal first variation


def green_north_jet(X, chart: str) -> Jet:
    """G_N in either chart: -(1/4pi)/sqrt(|x|^2+1) north, -(1/4pi)|y|/sqrt(|y|^2+1) south."""
    r2 = X[0] * X[0] + X[1] * X[1] + X[2] * X[2]
    if chart == "N":
        return (-1.0 / (4 * math.pi)) * (r2 + 1.0).power(-0.5)
    return (-1.0 / (4 * math.pi)) * (r2 / (r2 + 1.0)).sqrt()


def green_pair(x, y) -> np.ndarray:
    """G(x, y) for chart points (closed form on the round sphere)."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    d = np.linalg.norm(x - y, axis=-1)
    return -d / (4 * math.pi * np.sqrt(np.sum(x * x, -1) + 1) * np.sqrt(np.sum(y * y, -1) + 1))


def green_north(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return -1.0 / (4 * math.pi * np.sqrt(np.sum(y * y, -1) + 1))


def _round_terms(h: SymTensorField, x: np.ndarray, chart: str):
    """(Lap G_N, G_N, covariant h_ijij, tr_g h) at chart points of the round sphere."""
    geo = MetricField.round().geometry(x, 4)
    X = J.coordinates(x, 2)
    G = green_north_jet(X, chart)
    lapG = geo.laplacian(G).value
    hj = h.jet(x, 2)
    d2 = geo.cov(geo.cov(hj, 2), 3)  # [i, j, k, l] = nabla_l nabla_k h_ij
    gi = geo.ginv.value
    ddiv = np.einsum("...ik,...jl,...ijkl->...", gi, gi, d2.value)
    tr = np.einsum("...ij,...ij->...", gi, hj.value)
    return lapG, G.value, ddiv, tr


def green_weighted_constant(h: SphereTensor, rule: S3Rule | None = None) -> float:
    """c_h with I(N,q,h) = (first term) + G(N,q) c_h.

    c_h = -1/8 int (Lap G_N - 5/2 G_N) h_ijij - 1/8 int (Lap G_N + 5/16 G_N) tr h + 1/8 tr h(N).
    """
    rule = rule or s3_rule()
    parts = []
    for chart in ("N", "S"):
        def f(x, chart=chart):
            lapG, G, ddiv, tr = _round_terms(h.chart(chart), x, chart)
            return -0.125 * (lapG - 2.5 * G) * ddiv - 0.125 * (lapG + 5.0 / 16.0 * G) * tr
        parts.append(integrate(f, rule.chart(chart)))
    trN = 0.25 * float(np.trace(h.south(np.zeros((1, 3)))[0]))
    return math.fsum(parts) + 0.125 * trN


def _kernel(x: np.ndarray, y: np.ndarray, singular: bool = True) -> np.ndarray:
    r2 = np.sum(x * x, axis=-1) + 1.0
    out = -2.0 / np.sqrt(r2) - r2 ** -1.5
    if singular:
        out = out + 2.0 / np.linalg.norm(x - y, axis=-1)
    return out


@dataclass(frozen=True)
class OffDiagonal:
    value: float
    first_term: float
    green_constant: float
    green_value: float


def _s_values(theta: SymTensorField, x: np.ndarray) -> np.ndarray:
    return double_divergence_jet(theta.jet(x, 2)).value


def _multipole_singular(theta: SymTensorField, y: np.ndarray, center: np.ndarray, radius: float,
                        n_r: int, n_theta: int, lmax: int) -> float:
    """int s(x) / |x - y| dx over the support ball by the Legendre expansion about its centre."""
    from scipy.special import eval_legendre

    d = y - center
    ry = float(np.linalg.norm(d))
    dirs, wa = angular_rule(n_theta)
    yhat = d / ry if ry > 0 else np.array([0.0, 0.0, 1.0])
    cos_g = dirs @ yhat
    P = np.stack([eval_legendre(l, cos_g) for l in range(lmax + 1)])  # (l, dirs)
    total = []
    for a, b in ((0.0, min(ry, radius)), (min(ry, radius), radius)):
        if b <= a:
            continue
        r, wr = gauss_legendre(n_r, a, b)
        s = _s_values(theta, center + r[:, None, None] * dirs[None, :, :])  # (r, dirs)
        ang = (s * wa[None, :]) @ P.T  # (r, l)
        small, large = np.minimum(r, ry), np.maximum(r, ry)
        ls = np.arange(lmax + 1)
        radial = (small[:, None] / large[:, None]) ** ls[None, :] / large[:, None]
        total.append(float(np.sum(wr[:, None] * r[:, None] ** 2 * radial * ang)))
    return math.fsum(total)


def offdiagonal_first_term(theta: SymTensorField, y, route: str = "polar", support=None, n_r: int = 64,
                           n_theta: int = 32, lmax: int = 48, scale: float | None = None) -> float:
    """-(1/256 pi^2)(|y|^2+1)^-1/2 int s(x) K_y(x) dx by one of two quadratures.

    ``polar``: polar coordinates centred at y (the r^2 Jacobian absorbs
    1/|x - y|); with ``support = (center, radius)`` each ray stops at the
    support sphere, otherwise the radius is mapped onto all of R^3.
    ``multipole``: polar coordinates centred at the support centre, with the
    singular part expanded as 1/|x - y| = sum r<^l / r>^(l+1) P_l(cos gamma)
    and a radial break at |y - center| when y lies inside the support.
    """
    y = np.asarray(y, dtype=float)
    pre = FLUX_PREFACTOR / math.sqrt(float(y @ y) + 1.0)
    if route == "polar":
        if support is None:
            rule = radial_rule(n_r, n_theta, scale or max(1.0, float(np.linalg.norm(y))), center=y)
        else:
            rule = star_rule(y, support[1], support[0], n_r, n_theta)
        return pre * integrate(lambda x: _s_values(theta, x) * _kernel(x, y), rule)
    if route == "multipole":
        if support is None:
            raise FieldError("multipole route needs the support ball (center, radius) of theta")
        center, radius = np.asarray(support[0], dtype=float), float(support[1])
        smooth = integrate(lambda x: _s_values(theta, x) * _kernel(x, y, singular=False),
                           ball_rule(radius, n_r, n_theta, center))
        return pre * (smooth + 2.0 * _multipole_singular(theta, y, center, radius, n_r, n_theta, lmax))
    raise FieldError(f"unknown route {route!r}")


def i_offdiagonal(h: SphereTensor, y, route: str = "polar", s3: S3Rule | None = None,
                  green_constant: float | None = None, **kw) -> OffDiagonal:
    """I(N, q, h) with q at chart point y of the north chart."""
    theta = pullback_theta(h.north)
    first = offdiagonal_first_term(theta, y, route, **kw)
    c_h = green_weighted_constant(h, s3) if green_constant is None else green_constant
    G = float(green_north(np.asarray(y, dtype=float)[None])[0])
    return OffDiagonal(first + G * c_h, first, c_h, G)


# ---------------------------------------------------------------------------
# gauge


P2_MONOMIALS = ((2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2))
SYM_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


@dataclass(frozen=True)
class QuadPolyVectorField:
    """A_i(y) = sum_m coeffs[i, m] y^P2_MONOMIALS[m]."""

    coeffs: np.ndarray  # (3, 6)

    @property
    def dimension(self) -> int:
        return self.coeffs.size

    def gradient_linear(self) -> np.ndarray:
        """D[i, a, k]: d_a A_i = sum_k D[i, a, k] y_k."""
        D = np.zeros((3, 3, 3))
        for m, mono in enumerate(P2_MONOMIALS):
            for a in range(3):
                if mono[a] == 0:
                    continue
                rest = list(mono)
                rest[a] -= 1
                k = rest.index(1) if 1 in rest else rest.index(2)
                D[:, a, k] += self.coeffs[:, m] * mono[a]
        return D

    def symmetrized_gradient(self) -> np.ndarray:
        """H[i, j, k] = coefficient of y_k in d_i A_j + d_j A_i."""
        D = self.gradient_linear()
        return D.transpose(1, 0, 2) + D

    def jets(self, Y) -> list[Jet]:
        out = []
        for i in range(3):
            acc = Y[0] * 0.0
            for m, mono in enumerate(P2_MONOMIALS):
                c = self.coeffs[i, m]
                if c == 0:
                    continue
                term = Y[0] * 0.0 + c
                for a in range(3):
                    for _ in range(mono[a]):
                        term = term * Y[a]
                acc = acc + term
            out.append(acc)
        return out


def _gauge_matrix() -> np.ndarray:
    """Linear map coeffs (18) -> upper-triangular coefficients of d_i A_j + d_j A_i (18)."""
    cols = []
    for idx in range(18):
        c = np.zeros(18)
        c[idx] = 1.0
        H = QuadPolyVectorField(c.reshape(3, 6)).symmetrized_gradient()
        cols.append(np.concatenate([H[i, j] for i, j in SYM_PAIRS]))
    return np.stack(cols, axis=1)


GAUGE_MATRIX = _gauge_matrix()


def gauge_linear_solve(H) -> QuadPolyVectorField:
    """Unique A in P_2^3 with d_i A_j + d_j A_i = H_ij; H[i, j, k] is the y_k coefficient."""
    H = np.asarray(H, dtype=float)
    if H.shape != (3, 3, 3):
        raise FieldError("H must have shape (3, 3, 3)")
    if np.max(np.abs(H - H.transpose(1, 0, 2))) > 1e-14 * max(1.0, float(np.max(np.abs(H)))):
        raise FieldError("H must be symmetric in its first two indices")
    rhs = np.concatenate([H[i, j] for i, j in SYM_PAIRS])
    if np.linalg.matrix_rank(GAUGE_MATRIX) < 18:
        raise FieldError("gauge system is singular")
    return QuadPolyVectorField(np.linalg.solve(GAUGE_MATRIX, rhs).reshape(3, 6))


def smooth_step(s: Jet) -> Jet:
    """exp(-1/s) for s > 0 and 0 otherwise, in jet arithmetic."""
    c = s.c.copy()
    off = c[..., 0] <= 0
    c[off] = 0.0
    c[off, 0] = 1.0
    out = (-(Jet(c, s.order).reciprocal())).exp()
    out.c[off] = 0.0
    return out


def cutoff_jet(Y, radius: float) -> Jet:
    """1 for |y| <= r, 0 for |y| >= 2r, smooth in between (function of |y|^2)."""
    t = (Y[0] * Y[0] + Y[1] * Y[1] + Y[2] * Y[2]) * (1.0 / radius ** 2)
    a = smooth_step(4.0 - t)
    b = smooth_step(t - 1.0)
    return a / (a + b)


@dataclass(frozen=True)
class GaugeSolution:
    X: VectorFieldChart  # south chart, y = 0 at N
    alpha1: np.ndarray  # alpha^(1)_i = alpha1[i, k] y_k
    alpha2: QuadPolyVectorField
    residual_jet: tuple[np.ndarray, np.ndarray]  # (h - L_X g)(N) and its first derivatives
    gauged: SphereTensor
    theta: SymTensorField
    cutoff_radius: float

    @property
    def quadrature(self) -> QuadratureConfig:
        return gauge_quadrature(self.cutoff_radius)

    @property
    def residual(self) -> float:
        return max(float(np.max(np.abs(self.residual_jet[0]))), float(np.max(np.abs(self.residual_jet[1]))))


def _lie_derivative_coordinates(X: Jet, g: Jet) -> Jet:
    """X^k d_k g_ij + g_kj d_i X^k + g_ik d_j X^k."""
    k = min(X.order, g.order) - 1
    dX = X.grad()  # [k, i] = d_i X^k
    dg = g.grad()  # [i, j, k] = d_k g_ij
    a = J.einsum("k,ijk->ij", X.truncate(k), dg.truncate(k))
    b = J.einsum("kj,ki->ij", g.truncate(k), dX.truncate(k))
    return a + b + b.swapaxes(-1, -2)


def _supported(h: SymTensorField, inner: float) -> SymTensorField:
    """Evaluate ``h`` only where |x| > inner (it vanishes identically elsewhere)."""

    def evaluator(x, k):
        out = Jet.zeros(x.shape[:-1] + (3, 3), k)
        sel = np.sum(x * x, axis=-1) > inner ** 2 * (1 - 1e-12)
        if np.any(sel):
            out.c[sel] = h.jet(x[sel], k).c
        return out

    return SymTensorField(evaluator, h.decay_exponent, h.derivative_order_available, h.name, h.on_sphere)


DEFAULT_CUTOFF_RADIUS = 0.1


def gauge_quadrature(cutoff_radius: float = DEFAULT_CUTOFF_RADIUS, band_panels: int = 16) -> QuadratureConfig:
    """Panel rule for gauged theta: the chart image of the cutoff band, |x| in (1/2r, 1/r),
    gets ``band_panels`` sub-panels because the cutoff varies there on a scale ~ r."""
    lo, hi = 0.5 / cutoff_radius, 1.0 / cutoff_radius
    band = tuple(float(b) for b in np.linspace(lo, hi, band_panels + 1))
    inner = tuple(b for b in (0.5, 1.0, 2.0) if b < lo)
    return QuadratureConfig(panel_breaks=inner + band + (2 * hi, 4 * hi), panel_levels=((8, 16), (12, 20)))


def gauge_normalize(h: SphereTensor, cutoff_radius: float = DEFAULT_CUTOFF_RADIUS) -> GaugeSolution:
    """X with (h - L_X g)(N) = 0 and D(h - L_X g)(N) = 0, cut off near N."""
    origin = np.zeros((1, 3))
    hj = h.south.jet(origin, 1)
    h0 = hj.value[0]
    h1 = hj.grad().value[0]  # [i, j, k] = d_k h_ij(0)
    geo = MetricField.round().geometry(origin, 2)
    gam0 = geo.gamma.value[0]  # [l, i, j]
    alpha1 = 0.5 * h0
    # d_k (L_X g)_ij(0) = H from alpha^(2) plus 2 Gamma^l_ij(0) d_k alpha^(1)_l (zero on the round chart)
    H = h1 + 2.0 * np.einsum("lij,lk->ijk", gam0, alpha1)
    H = 0.5 * (H + H.transpose(1, 0, 2))
    A = gauge_linear_solve(H)

    def x_eval(y, k):
        Y = J.coordinates(y, k)
        eta = cutoff_jet(Y, cutoff_radius)
        quad = A.jets(Y)
        t4 = tau_jet(Y) ** 4
        comps = []
        for j in range(3):
            lin = Y[0] * 0.0
            for m in range(3):
                if alpha1[j, m] != 0:
                    lin = lin + alpha1[j, m] * Y[m]
            comps.append((lin + quad[j]) * eta * t4)  # X^j = g^jk alpha_k eta
        return J.stack(comps, axis=-1)

    X = VectorFieldChart(x_eval, -math.inf, name="gauge")
    kappa = lie_derivative_round(X)  # tau^4 L_X g in the south chart

    def lxg_eval(y, k):
        return kappa.jet(y, k) * (tau_jet(J.coordinates(y, k)) ** -4).expand_dims(-1).expand_dims(-1)

    lxg_south = SymTensorField(lxg_eval, -math.inf, kappa.derivative_order_available, "L_X g", True)
    lxg_north = _supported(invert_tensor(lxg_south), 0.5 / cutoff_radius)
    gauged = SphereTensor(h.north - lxg_north, h.south - lxg_south, f"gauged({h.name})")
    theta = pullback_theta(gauged.north)
    theta = SymTensorField(theta.evaluator, -2.0, theta.derivative_order_available,
                           f"theta(gauged {h.name})", True)
    # residual from the coordinate formula of the Lie derivative (independent of kappa)
    Xj = X.jet(origin, 2)
    gj = MetricField.round().jet(origin, 2)
    res = h.south.jet(origin, 1) - _lie_derivative_coordinates(Xj, gj)
    residual = (res.value[0], res.grad().value[0])
    return GaugeSolution(X, alpha1, A, residual, gauged, theta, cutoff_radius)


def gauge_decay_audit(sol: GaugeSolution, max_order: int = 3):
    return decay_audit(sol.theta, -2.0, max_order=max_order)


# ---------------------------------------------------------------------------
# TT orthogonality witness


def tau_grid(grid) -> np.ndarray:
    pts = grid.points()
    return np.sqrt((np.sum(pts * pts, axis=-1) + 1.0) / 2.0)


def tt_preconditions(kappa: GridTensor) -> tuple[float, float]:
    """Relative sizes of tr kappa and div(tau^-6 kappa) on the grid."""
    scale = max(float(np.max(np.abs(kappa.values))), 1e-300)
    tr = float(np.max(np.abs(np.trace(kappa.values, axis1=-2, axis2=-1)))) / scale
    mu = kappa.values * tau_grid(kappa.grid)[..., None, None] ** -6
    div = spectral_divergence(mu, kappa.grid)
    mscale = max(float(np.max(np.abs(mu))), 1e-300)
    return tr, float(np.max(np.abs(div))) / mscale


def tt_orthogonality_residual(theta: GridTensor, kappa: GridTensor, tol: float = 1e-8) -> float:
    """int theta_ij kappa_ij tau^-6 dx (= int <h, k> dmu) after checking kappa is TT."""
    if theta.grid != kappa.grid:
        raise FieldError("theta and kappa live on different grids")
    tr, div = tt_preconditions(kappa)
    if tr > tol or div > tol:
        raise FieldError(f"kappa is not transverse traceless (tr {tr:.2e}, div {div:.2e})")
    w = tau_grid(kappa.grid) ** -6
    prod = np.einsum("...ij,...ij->...", theta.values, kappa.values) * w
    return math.fsum(prod.ravel()) * kappa.grid.cell_volume


def random_tt_kappa(grid, rng: np.random.Generator, width: float = 2.0) -> GridTensor:
    """kappa = tau^6 mu with mu the flat TT part of a random smooth tensor."""
    from .symbol import tt_project

    pts = grid.points()
    env = np.exp(-np.sum(pts * pts, axis=-1) / width ** 2)
    coeffs = rng.normal(size=(3, 3))
    coeffs = coeffs + coeffs.T
    poly = 1.0 + pts @ rng.normal(size=3) * 0.3
    raw = (env * poly)[..., None, None] * coeffs
    mu = tt_project(raw, grid)
    return GridTensor(mu * tau_grid(grid)[..., None, None] ** 6, grid)
