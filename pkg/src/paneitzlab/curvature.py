"""Exact curvature and Paneitz operator of a metric given in chart coordinates.

All quantities are computed in the coordinate frame with jet arithmetic, so
nested derivatives (Christoffel -> Riemann -> Ricci -> scalar -> Laplacian of
the scalar curvature) are exact closed-form values at each point.

Conventions: ``gamma[k, i, j]`` is Gamma^k_ij; ``riemann[l, i, j, k]`` is
R^l_ijk with R(d_i, d_j) d_k = R^l_ijk d_l; Ricci Rc_jk = R^i_ijk, so the unit
sphere has Rc = 2 g and R = 6.  Covariant derivatives append their index:
``cov(T)[..., c] = nabla_c T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import jets as J
from .fields import FieldError, ScalarField, SymTensorField, _as_points, tau_jet
from .jets import Jet

LETTERS = "abcdefghmnopqrsuvwxyz"


class MetricError(ValueError):
    """Metric is not positive definite at an evaluation point."""


@dataclass(frozen=True)
class MetricField:
    """Riemannian metric g_ij on the chart."""

    g: SymTensorField
    name: str = ""
    flat: bool = False
    weight: ScalarField | None = None  # set when g = weight * delta (enables scalar fast paths)

    @staticmethod
    def euclidean() -> "MetricField":
        eye = np.eye(3)
        g = SymTensorField(lambda x, k: J.einsum(",ij->ij", Jet.constant(np.ones(x.shape[:-1]), k), eye),
                           0.0, name="delta")
        return MetricField(g, "flat", True)

    @staticmethod
    def round() -> "MetricField":
        """Round metric of the unit S^3 in a stereographic chart: tau^-4 |dx|^2."""
        eye = np.eye(3)
        g = SymTensorField.from_expression(lambda X: J.einsum(",ij->ij", tau_jet(X) ** -4, eye), -4.0,
                                           name="round")
        w = ScalarField.from_expression(lambda X: tau_jet(X) ** -4, -4.0, name="tau^-4")
        return MetricField(g, "round", weight=w)

    def perturbed(self, h: SymTensorField, t: float) -> "MetricField":
        return MetricField(self.g + float(t) * h, f"{self.name}+{t}h")

    def conformal(self, rho: ScalarField) -> "MetricField":
        """rho^-4 g."""
        factor = rho.map(lambda j: j ** -4)
        weight = None if self.weight is None else self.weight * factor
        return MetricField(self.g * factor, f"rho^-4 {self.name}", weight=weight)

    def jet(self, x, order: int) -> Jet:
        return self.g.jet(x, order)

    def geometry(self, x, order: int = 4) -> "Geometry":
        return Geometry(self, _as_points(x), order)


def _index_letters(n: int, skip: str = "") -> str:
    return "".join(c for c in LETTERS if c not in skip)[:n]


def covariant_derivative(T: Jet, gamma: Jet, rank: int) -> Jet:
    """nabla T for a covariant tensor of the given rank; new index appended last."""
    dT = T.grad()
    if rank == 0:
        return dT
    k = min(dT.order, gamma.order)
    out = dT.truncate(k)
    idx = _index_letters(rank, skip="lz")
    Tt, Gt = T.truncate(k), gamma.truncate(k)
    for p in range(rank):
        src = idx[:p] + "l" + idx[p + 1:]
        # Gamma^l_{z a_p} T_{...l...}
        out = out - J.einsum(f"l{idx[p]}z,{src}->{idx}z", Gt, Tt)
    return out


class Geometry:
    """Curvature jets of a metric about a batch of points, up to ``order``."""

    def __init__(self, metric: MetricField, x: np.ndarray, order: int = 4):
        if order < 2:
            raise FieldError("curvature needs metric jets of order >= 2")
        self.metric = metric
        self.x = x
        self.order = order
        g = metric.jet(x, order)
        try:
            np.linalg.cholesky(g.value)
        except np.linalg.LinAlgError as exc:
            raise MetricError(f"metric {metric.name} is not positive definite at some point") from exc
        self.g = g
        self.flat = metric.flat
        self.w = None if metric.weight is None or metric.flat else metric.weight.jet(x, order)

    @cached_property
    def winv(self) -> Jet:
        return self.w.reciprocal()

    @cached_property
    def ginv(self) -> Jet:
        if self.flat:
            return self.g  # the identity
        if self.w is not None:
            return J.einsum(",ij->ij", self.winv, np.eye(3))
        return J.inverse(self.g)

    @cached_property
    def gamma(self) -> Jet:
        if self.flat:
            return Jet.zeros(self.x.shape[:-1] + (3, 3, 3), self.order - 1)
        lower = 0.5 * _lower_christoffel(self.g.grad())
        if self.w is not None:
            return lower * _scalar_like(self.winv, 3)
        return J.einsum("kl,lij->kij", self.ginv.truncate(lower.order), lower)

    def trace(self, A: Jet) -> Jet:
        """g^ij A_ij."""
        if self.flat:
            return J.einsum("ii->", A)
        if self.w is not None:
            return self.winv * J.einsum("ii->", A)
        return J.einsum("ij,ij->", self.ginv.truncate(A.order), A)

    def pair(self, A: Jet, B: Jet) -> Jet:
        """g^ia g^jb A_ij B_ab."""
        k = min(A.order, B.order)
        A, B = A.truncate(k), B.truncate(k)
        if self.flat:
            return J.einsum("ij,ij->", A, B)
        if self.w is not None:
            return (self.winv * self.winv) * J.einsum("ij,ij->", A, B)
        gi = self.ginv.truncate(k)
        up = J.einsum("ia,ab->ib", gi, A)
        up = J.einsum("ib,jb->ij", up, gi)
        return J.einsum("ij,ij->", up, B)

    @cached_property
    def riemann(self) -> Jet:
        if self.flat:
            return Jet.zeros(self.x.shape[:-1] + (3, 3, 3, 3), self.order - 2)
        gam = self.gamma
        dgam = gam.grad()  # [l, j, k, i] = d_i Gamma^l_jk
        term = dgam.transpose(0, 3, 1, 2)  # [l, i, j, k] = d_i Gamma^l_jk
        deriv = term - term.swapaxes(-3, -2)
        quad = J.einsum("lim,mjk->lijk", gam, gam)
        quad = quad - quad.swapaxes(-3, -2)
        return deriv + quad.truncate(deriv.order)

    @cached_property
    def ricci(self) -> Jet:
        return J.einsum("iijk->jk", self.riemann)

    @cached_property
    def scalar(self) -> Jet:
        return self.trace(self.ricci)

    @cached_property
    def ricci_norm2(self) -> Jet:
        return self.pair(self.ricci, self.ricci)

    def cov(self, T: Jet, rank: int) -> Jet:
        if self.flat:
            return T.grad()
        return covariant_derivative(T, self.gamma, rank)

    def laplacian(self, f: Jet) -> Jet:
        """Laplace-Beltrami of a scalar jet: g^ij (d_i d_j f - Gamma^k_ij d_k f)."""
        return self.trace(self.cov(self.cov(f, 0), 1))

    def dot(self, a: Jet, b: Jet) -> Jet:
        """g^ij a_i b_j."""
        k = min(a.order, b.order)
        if self.w is not None:
            return self.winv.truncate(k) * J.einsum("j,j->", a.truncate(k), b.truncate(k))
        ga = J.einsum("ij,i->j", self.ginv.truncate(k), a.truncate(k))
        return J.einsum("j,j->", ga, b)

    @cached_property
    def lap_scalar(self) -> Jet:
        return self.laplacian(self.scalar)

    @cached_property
    def q_curvature(self) -> Jet:
        lr = self.lap_scalar
        k = lr.order
        return -0.25 * lr - 2.0 * self.ricci_norm2.truncate(k) + (23.0 / 32.0) * (self.scalar * self.scalar).truncate(k)

    def paneitz(self, phi: Jet) -> Jet:
        """P phi = Lap^2 phi + 4 Rc^ij phi_;ij - 5/4 R Lap phi + 3/4 <dR, dphi> - 1/2 Q phi."""
        lap = self.laplacian(phi)
        bilap = self.laplacian(lap)
        k = bilap.order
        hess = self.cov(self.cov(phi, 0), 1)
        term_rc = self.pair(self.ricci, hess)
        grad_term = self.dot(self.scalar.grad(), phi.grad())
        out = (bilap + 4.0 * term_rc.truncate(k) - 1.25 * (self.scalar * lap).truncate(k)
               + 0.75 * grad_term.truncate(k) - 0.5 * (self.q_curvature.truncate(k) * phi.truncate(k)))
        return out


def _scalar_like(s: Jet, rank: int) -> Jet:
    """Scalar jet with ``rank`` trailing unit axes, for broadcasting against tensors."""
    for _ in range(rank):
        s = s.expand_dims(-1)
    return s


def _lower_christoffel(dg: Jet) -> Jet:
    """Gamma_{l i j} (first kind, without the 1/2): d_i g_lj + d_j g_li - d_l g_ij."""
    # dg[a, b, c] = d_c g_ab
    return dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1)


@dataclass(frozen=True)
class CurvaturePack:
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray
    ricci_norm2: np.ndarray
    q_curvature: np.ndarray


def curvature_pipeline(g: MetricField, x) -> CurvaturePack:
    geo = g.geometry(x, 4)
    return CurvaturePack(geo.gamma.value, geo.riemann.value, geo.ricci.value, geo.scalar.value,
                         geo.ricci_norm2.value, geo.q_curvature.value)


def laplace_beltrami(g: MetricField, phi: ScalarField, x) -> np.ndarray:
    geo = g.geometry(x, 2)
    return geo.laplacian(phi.jet(geo.x, 2)).value


def paneitz_apply_exact(g: MetricField, phi: ScalarField, x) -> np.ndarray:
    geo = g.geometry(x, 4)
    return geo.paneitz(phi.jet(geo.x, 4)).value


def paneitz_field(g: MetricField, phi: ScalarField) -> ScalarField:
    """P_g phi as a field (jets of order k need metric and phi jets of order k + 4)."""

    def evaluator(x, k):
        geo = g.geometry(x, k + 4)
        return geo.paneitz(phi.jet(x, k + 4))

    return ScalarField(evaluator, math.inf, phi.derivative_order_available - 4, name=f"P({phi.name})")


def conformal_covariance_residual(g: MetricField, rho: ScalarField, phi: ScalarField, x) -> float:
    """max |P_{rho^-4 g} phi - rho^7 P_g(rho phi)| over the sample points."""
    x = _as_points(x)
    r = rho(x)
    if np.any(r <= 0):
        raise FieldError("conformal factor must be positive on the samples")
    lhs = paneitz_apply_exact(g.conformal(rho), phi, x)
    rhs = r ** 7 * paneitz_apply_exact(g, rho * phi, x)
    return float(np.max(np.abs(lhs - rhs)))


def bianchi_residual(g: MetricField, x) -> float:
    """max |g^jk nabla_k Rc_ij - 1/2 d_i R| over the points (contracted second Bianchi)."""
    geo = g.geometry(x, 3)
    drc = geo.cov(geo.ricci, 2)  # [i, j, k] = nabla_k Rc_ij
    div = J.einsum("jk,ijk->i", geo.ginv.truncate(drc.order), drc)
    res = div - 0.5 * geo.scalar.grad()
    return float(np.max(np.abs(res.value)))
