"""Taylor coefficients in t of curvature quantities of g + t h.

The coefficient formulas are written in a g-orthonormal frame: repeated
indices are frame indices and ``h_ijk = nabla_k h_ij``, ``h_ijkl =
nabla_l nabla_k h_ij`` are g-covariant derivatives.  The frame is
E = L^-1 with g = L L^T (pointwise Cholesky in jet arithmetic), so frame
components are jets and scalar contractions can be differentiated again for
the Laplacian-of-bracket terms.

``fd_validate`` compares each expansion with the exact pipeline of
``curvature`` applied to g + t h and fits the log-log slope of the remainder.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import jets as J
from .curvature import Geometry, MetricField
from .fields import ScalarField, SymTensorField, _as_points
from .jets import Jet

T_GRID = (0.04, 0.02, 0.01, 0.005)  # at t = 0.1 the O(t^4) term still bends the slope
SLOPE_RANGE = (2.7, 3.3)

_e = J.einsum


def _frame_lower(T: Jet, F: Jet | None, n: int) -> Jet:
    """Frame components T_a.. = F_ai .. T_i.. of a covariant n-tensor (F None: identity)."""
    if F is None or n == 0:
        return T
    letters = "abcdefgh"[:n]
    out = T
    for p in range(n):
        src = letters[:p] + "z" + letters[p + 1:]
        out = _e(f"{letters[p]}z,{src}->{letters}", F, out)
    return out


def _dot(a: Jet, b: Jet) -> Jet:
    return _e("i,i->", a, b)


def _pair(a: Jet, b: Jet) -> Jet:
    return _e("ij,ij->", a, b)


_PHI_KEYS = ("phi", "phi_i", "phi_ij", "lap_phi")


class FrameData:
    """g-orthonormal frame components of h, phi and background curvature at points."""

    def __init__(self, metric: MetricField, h: SymTensorField, x, phi: ScalarField | None = None,
                 order: int = 4):
        self.x = _as_points(x)
        self.batch = self.x.shape[:-1]
        self.order = order
        self.metric = metric
        self.h_field = h
        self.geo: Geometry = metric.geometry(self.x, order)
        self.hc = h.jet(self.x, order)
        self.phi_field = phi

    def sq(self, T: Jet) -> Jet:
        """Sum of squares of all frame components."""
        idx = "ijkl"[: len(T.shape) - len(self.batch)]
        return _e(f"{idx},{idx}->", T, T)

    # frame -----------------------------------------------------------------
    @cached_property
    def L(self) -> Jet:
        return J.cholesky(self.geo.g)

    @cached_property
    def F(self) -> Jet | None:
        if self.metric.flat:
            return None
        if self.geo.w is not None:
            return J.einsum(",ij->ij", self.f_scalar, np.eye(3))
        return J.inverse(self.L)

    @cached_property
    def f_scalar(self) -> Jet:
        """w^-1/2 when g = w delta, so that F = f delta."""
        return self.geo.w.sqrt().reciprocal()

    def lower(self, T: Jet, n: int) -> Jet:
        if n and self.geo.w is not None:
            f = self.f_scalar
            fn = f if n == 1 else f ** n
            nt = len(T.shape) - len(self.batch)
            for _ in range(nt):
                fn = fn.expand_dims(-1)
            return T * fn
        return _frame_lower(T, self.F, n)

    def grad(self, s: Jet) -> Jet:
        return self.lower(s.grad(), 1)

    def hess(self, s: Jet) -> Jet:
        return self.lower(self.geo.cov(s.grad(), 1), 2)

    def lap(self, s: Jet) -> Jet:
        return self.geo.laplacian(s)

    # perturbation ------------------------------------------------------------
    @cached_property
    def h(self) -> Jet:
        return self.lower(self.hc, 2)

    @cached_property
    def _h1c(self) -> Jet:
        return self.geo.cov(self.hc, 2)

    @cached_property
    def h1(self) -> Jet:
        """[i, j, k] = nabla_k h_ij."""
        return self.lower(self._h1c, 3)

    @cached_property
    def h2(self) -> Jet:
        """[i, j, k, l] = nabla_l nabla_k h_ij."""
        return self.lower(self.geo.cov(self._h1c, 3), 4)

    @cached_property
    def trh(self) -> Jet:
        return _e("ii->", self.h)

    @cached_property
    def trh_i(self) -> Jet:
        return self.grad(self.trh)

    @cached_property
    def trh_ij(self) -> Jet:
        return self.hess(self.trh)

    @cached_property
    def hh(self) -> Jet:
        """h_ik h_jk."""
        return _e("ik,jk->ij", self.h, self.h)

    @cached_property
    def V(self) -> Jet:
        """2 h_ijj - (tr h)_i."""
        return 2.0 * _e("ijj->i", self.h1) - self.trh_i

    @cached_property
    def lap_h(self) -> Jet:
        return _e("ijkk->ij", self.h2)

    @cached_property
    def h_ikjk(self) -> Jet:
        return _e("ikjk->ij", self.h2)

    @cached_property
    def W(self) -> Jet:
        """h_ikjk + h_jkik - (tr h)_ij - Lap h_ij."""
        a = self.h_ikjk
        return a + a.swapaxes(-1, -2) - self.trh_ij - self.lap_h

    @cached_property
    def Z(self) -> Jet:
        """2 h_ikjk - (tr h)_ij - Lap h_ij."""
        return 2.0 * self.h_ikjk - self.trh_ij - self.lap_h

    @cached_property
    def B(self) -> Jet:
        """Lap h_ij + (tr h)_ij - h_ikjk - h_ikkj."""
        return self.lap_h + self.trh_ij - self.h_ikjk - _e("ikkj->ij", self.h2)

    @cached_property
    def C(self) -> Jet:
        """[i, j, k] = h_ikj + h_jki - h_ijk."""
        h1 = self.h1
        return _e("ikj->ijk", h1) + _e("jki->ijk", h1) - h1

    @cached_property
    def Y(self) -> Jet:
        """[i, k, l] = h_ikl + h_kli - h_ilk."""
        h1 = self.h1
        return h1 + _e("kli->ikl", h1) - _e("ilk->ikl", h1)

    @cached_property
    def D(self) -> Jet:
        """[i, j, k] = 2 h_ikj - h_ijk."""
        h1 = self.h1
        return 2.0 * _e("ikj->ijk", h1) - h1

    @cached_property
    def mixed(self) -> Jet:
        """[i, j, k, l] = 2 h_ikjl - h_klij - h_ijkl."""
        h2 = self.h2
        return 2.0 * _e("ikjl->ijkl", h2) - _e("klij->ijkl", h2) - h2

    # background curvature ----------------------------------------------------
    @cached_property
    def Rc(self) -> Jet:
        return self.lower(self.geo.ricci, 2)

    @cached_property
    def R(self) -> Jet:
        return self.geo.scalar

    @cached_property
    def R_i(self) -> Jet:
        return self.grad(self.R)

    @cached_property
    def R_ij(self) -> Jet:
        return self.hess(self.R)

    @cached_property
    def A(self) -> Jet:
        """h_ijij - Lap tr h - Rc_ij h_ij."""
        return _e("ijij->", self.h2) - _e("ii->", self.trh_ij) - _pair(self.Rc, self.h)

    @cached_property
    def A_i(self) -> Jet:
        return self.grad(self.A)

    @cached_property
    def A_ij(self) -> Jet:
        return self.hess(self.A)

    @cached_property
    def lapA(self) -> Jet:
        return self.lap(self.A)

    # contractions shared by several formulas ---------------------------------
    @cached_property
    def Bh(self) -> Jet:
        return _pair(self.B, self.h)

    @cached_property
    def Rc_hh(self) -> Jet:
        return _pair(self.Rc, self.hh)

    @cached_property
    def RcRc(self) -> Jet:
        """[j, k] = Rc_ij Rc_ik."""
        return _e("ij,ik->jk", self.Rc, self.Rc)

    @cached_property
    def RcRc_h(self) -> Jet:
        return _pair(self.RcRc, self.h)

    @cached_property
    def Rc_h_Rc_h(self) -> Jet:
        """Rc_ij Rc_kl h_ik h_jl."""
        t = _e("ik,kl->il", self.h, self.Rc)
        t = _e("il,jl->ij", t, self.h)
        return _pair(self.Rc, t)

    @cached_property
    def Rc_h_mixed(self) -> Jet:
        return _pair(self.Rc, _e("kl,ijkl->ij", self.h, self.mixed))

    @cached_property
    def Rc_h_W(self) -> Jet:
        return _pair(self.Rc, _e("ik,jk->ij", self.h, self.W))

    @cached_property
    def Rc_YY(self) -> Jet:
        return _pair(self.Rc, _e("ikl,jkl->ij", self.Y, self.Y))

    @cached_property
    def Rc_DV(self) -> Jet:
        return _pair(self.Rc, _e("ijk,k->ij", self.D, self.V))

    @cached_property
    def Vh_dR(self) -> Jet:
        return _dot(_e("i,ij->j", self.V, self.h), self.R_i)

    @cached_property
    def Dh_dR(self) -> Jet:
        return _dot(_e("ijk,ij->k", self.D, self.h), self.R_i)

    # test function -----------------------------------------------------------
    @cached_property
    def phi(self) -> Jet:
        if self.phi_field is None:
            raise ValueError("this quantity needs a test function phi")
        return self.phi_field.jet(self.x, self.order)

    @cached_property
    def phi_i(self) -> Jet:
        return self.grad(self.phi)

    @cached_property
    def phi_ij(self) -> Jet:
        return self.hess(self.phi)

    @cached_property
    def lap_phi(self) -> Jet:
        return self.lap(self.phi)

    def with_phi(self, phi: ScalarField) -> "FrameData":
        """Same points, metric and h with another test function (caches are shared)."""
        new = copy.copy(self)
        new.__dict__ = {k: v for k, v in self.__dict__.items() if k not in _PHI_KEYS}
        new.phi_field = phi
        return new

    # frame conversion of plain arrays ------------------------------------------
    def frame_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(F, L) values; lower indices contract with F, upper ones with L^T."""
        if self.F is None:
            eye = np.broadcast_to(np.eye(3), self.batch + (3, 3))
            return eye, eye
        return self.F.value, self.L.value


# ---------------------------------------------------------------------------
# coefficient formulas


@dataclass
class ExpansionCoefficients:
    """Values of the t^0, t^1 and t^2 coefficients at the points."""

    order0: np.ndarray
    order1: np.ndarray
    order2: np.ndarray
    groups: dict = field(default_factory=dict)

    def predict(self, t: float) -> np.ndarray:
        return self.order0 + t * self.order1 + t * t * self.order2


def _total(groups: dict[str, Jet]) -> np.ndarray:
    return np.sum([g.value for g in groups.values()], axis=0)


def measure_coefficients(d: FrameData) -> ExpansionCoefficients:
    trh = d.trh.value
    return ExpansionCoefficients(np.ones_like(trh), 0.5 * trh, trh * trh / 8.0 - d.sq(d.h).value / 4.0)


def christoffel_coefficients(d: FrameData) -> ExpansionCoefficients:
    """Difference tensor Gamma(g + t h) - Gamma(g) as [k, i, j]."""
    c1 = 0.5 * _e("ijk->kij", d.C)
    c2 = -0.5 * _e("ija,ka->kij", d.C, d.h)
    return ExpansionCoefficients(np.zeros_like(c1.value), c1.value, c2.value)


def riemann_coefficients(d: FrameData) -> ExpansionCoefficients:
    """[l, i, j, k] in the index convention whose (l, i) trace is minus Ricci."""
    h2, h, C = d.h2, d.h, d.C
    c1 = 0.5 * (_e("ilkj->lijk", h2) + _e("jkli->lijk", h2) + _e("klij->lijk", h2)
                - _e("jlki->lijk", h2) - _e("iklj->lijk", h2) - _e("klji->lijk", h2))
    t1 = (_e("iakj,la->lijk", h2, h) + _e("jkai,la->lijk", h2, h) + _e("kaij,la->lijk", h2, h)
          - _e("jaki,la->lijk", h2, h) - _e("ikaj,la->lijk", h2, h) - _e("kaji,la->lijk", h2, h))
    c2 = -0.5 * t1 + 0.25 * _e("ila,jka->lijk", C, C) - 0.25 * _e("ika,jla->lijk", C, C)
    return ExpansionCoefficients(_riemann_frame(d, d.geo.riemann.value), c1.value, c2.value)


def ricci_coefficients(d: FrameData) -> ExpansionCoefficients:
    h2 = d.h2
    bracket = _e("ikjl->ijkl", h2) + _e("jkil->ijkl", h2) - _e("klji->ijkl", h2) - h2
    c2 = (-0.5 * _e("ijkl,kl->ij", bracket, d.h) + 0.25 * _e("ikl,jkl->ij", d.Y, d.Y)
          - 0.25 * _e("ijk,k->ij", d.C, d.V))
    return ExpansionCoefficients(d.Rc.value, (0.5 * d.W).value, c2.value)


def scalar_coefficients(d: FrameData) -> ExpansionCoefficients:
    c2 = d.Bh + 0.25 * d.sq(d.C) - 0.25 * d.sq(d.V) + d.Rc_hh
    return ExpansionCoefficients(d.R.value, d.A.value, c2.value)


def laplacian_coefficients(d: FrameData) -> ExpansionCoefficients:
    c1 = -0.5 * _dot(d.V, d.phi_i) - _pair(d.h, d.phi_ij)
    c2 = (0.5 * _dot(_e("i,ij->j", d.V, d.h), d.phi_i)
          + 0.5 * _dot(_e("ijk,ij->k", d.D, d.h), d.phi_i)
          + _pair(d.hh, d.phi_ij))
    return ExpansionCoefficients(d.lap_phi.value, c1.value, c2.value)


def scalar_squared_coefficients(d: FrameData) -> ExpansionCoefficients:
    R, A = d.R, d.A
    c2 = (A * A + 2.0 * R * d.Bh + 0.5 * R * d.sq(d.C) - 0.5 * R * d.sq(d.V)
          + 2.0 * R * d.Rc_hh)
    return ExpansionCoefficients((R * R).value, (2.0 * R * A).value, c2.value)


def ricci_norm2_coefficients(d: FrameData) -> ExpansionCoefficients:
    c1 = _pair(d.Rc, d.Z) - 2.0 * d.RcRc_h
    c2 = (0.25 * d.sq(d.W) - d.Rc_h_mixed - 2.0 * d.Rc_h_W + 0.5 * d.Rc_YY - 0.5 * d.Rc_DV
          + 2.0 * _pair(d.RcRc, d.hh) + d.Rc_h_Rc_h)
    return ExpansionCoefficients(d.sq(d.Rc).value, c1.value, c2.value)


def laplacian_scalar_coefficients(d: FrameData) -> ExpansionCoefficients:
    c1 = d.lapA - 0.5 * _dot(d.V, d.R_i) - _pair(d.h, d.R_ij)
    c2 = (d.lap(d.Bh) - _pair(d.h, d.A_ij) + 0.25 * d.lap(d.sq(d.C)) - 0.25 * d.lap(d.sq(d.V))
          - 0.5 * _dot(d.V, d.A_i) + d.lap(d.Rc_hh) + 0.5 * d.Vh_dR + 0.5 * d.Dh_dR
          + _pair(d.hh, d.R_ij))
    return ExpansionCoefficients(d.geo.lap_scalar.value, c1.value, c2.value)


def q_first_order_groups(d: FrameData) -> dict[str, Jet]:
    Rc, R = d.Rc, d.R
    return {
        "lap_A": -0.25 * d.lapA,
        "ricci_Z": -2.0 * _pair(Rc, d.Z),
        "scalar_A": (23.0 / 16.0) * R * d.A,
        "V_dR": 0.125 * _dot(d.V, d.R_i),
        "h_hessR": 0.25 * _pair(d.h, d.R_ij),
        "ricci_ricci_h": 4.0 * d.RcRc_h,
    }


def q_second_order_groups(d: FrameData) -> dict[str, Jet]:
    R = d.R
    sumC, sumV = d.sq(d.C), d.sq(d.V)
    return {
        "lap_Bh": -0.25 * d.lap(d.Bh),
        "h_hessA": 0.25 * _pair(d.h, d.A_ij),
        "lap_C2": -(1.0 / 16.0) * d.lap(sumC),
        "lap_V2": (1.0 / 16.0) * d.lap(sumV),
        "V_dA": 0.125 * _dot(d.V, d.A_i),
        "lap_Rc_hh": -0.25 * d.lap(d.Rc_hh),
        "W2": -0.5 * d.sq(d.W),
        "Rc_h_mixed": 2.0 * d.Rc_h_mixed,
        "Rc_h_W": 4.0 * d.Rc_h_W,
        "A2": (23.0 / 32.0) * d.A * d.A,
        "R_Bh": (23.0 / 16.0) * R * d.Bh,
        "Rc_YY": -1.0 * d.Rc_YY,
        "Rc_DV": 1.0 * d.Rc_DV,
        "R_C2": (23.0 / 64.0) * R * sumC,
        "R_V2": -(23.0 / 64.0) * R * sumV,
        "Vh_dR": -0.125 * d.Vh_dR,
        "Dh_dR": -0.125 * d.Dh_dR,
        "hh_hessR": -0.25 * _pair(d.hh, d.R_ij),
        "Rc_Rc_hh": -4.0 * _pair(d.RcRc, d.hh),
        "Rc_h_Rc_h": -2.0 * d.Rc_h_Rc_h,
        "R_Rc_hh": (23.0 / 16.0) * R * d.Rc_hh,
    }


def q_coefficients(d: FrameData) -> ExpansionCoefficients:
    g1, g2 = q_first_order_groups(d), q_second_order_groups(d)
    groups = {f"first:{k}": v.value for k, v in g1.items()}
    groups.update({f"second:{k}": v.value for k, v in g2.items()})
    return ExpansionCoefficients(d.geo.q_curvature.value, _total(g1), _total(g2), groups)


def p1_groups(d: FrameData) -> dict[str, Jet]:
    """P^(1)_{g,h} phi split into its six displayed lines."""
    h, Rc, R, V = d.h, d.Rc, d.R, d.V
    phi, phi_i, phi_ij = d.phi, d.phi_i, d.phi_ij
    lap_phi = d.lap_phi
    return {
        "fourth_order": (-_pair(h, d.hess(lap_phi)) - d.lap(_pair(h, phi_ij))
                         - 0.5 * _dot(V, d.grad(lap_phi)) - 0.5 * d.lap(_dot(V, phi_i))),
        "hessian": (2.0 * _pair(d.Z, phi_ij) - 8.0 * _pair(_e("ij,ik->jk", Rc, h), phi_ij)
                    + 1.25 * R * _pair(h, phi_ij)),
        "laplacian_gradient": (-1.25 * d.A * lap_phi - 2.0 * _dot(_e("ij,ijk->k", Rc, d.D), phi_i)
                               + 0.625 * R * _dot(V, phi_i)),
        "gradient": (0.75 * _dot(d.A_i, phi_i) - 0.75 * _dot(_e("ij,i->j", h, d.R_i), phi_i)
                     + 0.125 * d.lapA * phi),
        "potential": (-0.125 * _pair(h, d.R_ij) - (1.0 / 16.0) * _dot(V, d.R_i)
                      + _pair(Rc, d.Z)) * phi,
        "curvature_potential": (-2.0 * d.RcRc_h - (23.0 / 32.0) * R * d.A) * phi,
    }


def p1_sphere_groups(d: FrameData) -> dict[str, Jet]:
    """P^(1) about the round metric with Rc = 2g and R = 6 folded into the coefficients."""
    h, V = d.h, d.V
    phi, phi_i, phi_ij = d.phi, d.phi_i, d.phi_ij
    lap_phi = d.lap_phi
    a = _e("ijij->", d.h2) - _e("ii->", d.trh_ij) - 2.0 * d.trh
    return {
        "fourth_order": (-_pair(h, d.hess(lap_phi)) - d.lap(_pair(h, phi_ij))
                         - 0.5 * _dot(V, d.grad(lap_phi)) - 0.5 * d.lap(_dot(V, phi_i))),
        "hessian": 2.0 * _pair(d.Z, phi_ij) - 8.5 * _pair(h, phi_ij) - 1.25 * a * lap_phi,
        "gradient": (-0.25 * _dot(V, phi_i) + 0.75 * _dot(d.grad(a), phi_i)
                     + 0.125 * d.lap(a) * phi),
        "potential": -(5.0 / 16.0) * a * phi,
    }


def p2_one_groups(d: FrameData) -> dict[str, Jet]:
    """P^(2)_{g,h} 1 term by term."""
    R = d.R
    sumC, sumV = d.sq(d.C), d.sq(d.V)
    return {
        "h_hessA": -0.125 * _pair(d.h, d.A_ij),
        "lap_Bh": 0.125 * d.lap(d.Bh),
        "V_dA": -(1.0 / 16.0) * _dot(d.V, d.A_i),
        "lap_C2": (1.0 / 32.0) * d.lap(sumC),
        "lap_V2": -(1.0 / 32.0) * d.lap(sumV),
        "lap_Rc_hh": 0.125 * d.lap(d.Rc_hh),
        "W2": 0.25 * d.sq(d.W),
        "Rc_h_mixed": -1.0 * d.Rc_h_mixed,
        "Rc_h_W": -2.0 * d.Rc_h_W,
        "A2": -(23.0 / 64.0) * d.A * d.A,
        "R_Bh": -(23.0 / 32.0) * R * d.Bh,
        "Rc_YY": 0.5 * d.Rc_YY,
        "Rc_DV": -0.5 * d.Rc_DV,
        "R_C2": -(23.0 / 128.0) * R * sumC,
        "R_V2": (23.0 / 128.0) * R * sumV,
        "curvature_gradients": 0.125 * (_pair(d.hh, d.R_ij) + 0.5 * d.Vh_dR + 0.5 * d.Dh_dR),
        "Rc_Rc_hh": 2.0 * _pair(d.RcRc, d.hh),
        "Rc_h_Rc_h": 1.0 * d.Rc_h_Rc_h,
        "R_Rc_hh": -(23.0 / 32.0) * R * d.Rc_hh,
    }


def p1_one_coefficients(d: FrameData) -> ExpansionCoefficients:
    """P_{g + t h} 1 = -Q/2 + t P^(1) 1 + t^2 P^(2) 1."""
    one = d.with_phi(ScalarField.constant(1.0))
    g2 = p2_one_groups(d)
    return ExpansionCoefficients(-0.5 * d.geo.q_curvature.value, _total(p1_groups(one)), _total(g2),
                                 {k: v.value for k, v in g2.items()})


def paneitz_coefficients(d: FrameData) -> ExpansionCoefficients:
    """P phi and P^(1) phi (the t^2 coefficient is not part of this expansion)."""
    p0 = d.geo.paneitz(d.phi).value
    groups = p1_groups(d)
    return ExpansionCoefficients(p0, _total(groups), np.full_like(p0, np.nan),
                                 {k: v.value for k, v in groups.items()})


COEFFICIENTS: dict[str, Callable[[FrameData], ExpansionCoefficients]] = {
    "measure": measure_coefficients,
    "christoffel": christoffel_coefficients,
    "riemann": riemann_coefficients,
    "ricci": ricci_coefficients,
    "scalar": scalar_coefficients,
    "laplacian": laplacian_coefficients,
    "scalar_squared": scalar_squared_coefficients,
    "ricci_norm2": ricci_norm2_coefficients,
    "laplacian_scalar": laplacian_scalar_coefficients,
    "q": q_coefficients,
    "paneitz": paneitz_coefficients,
    "paneitz_one": p1_one_coefficients,
}
SELECTORS = tuple(COEFFICIENTS)
NEEDS_PHI = ("laplacian", "paneitz")


# ---------------------------------------------------------------------------
# public entry points


def measure_expansion(g: MetricField, h: SymTensorField, x) -> ExpansionCoefficients:
    """Coefficients of dmu_{g+th} / dmu_g."""
    return measure_coefficients(FrameData(g, h, x))


def q_expansion(g: MetricField, h: SymTensorField, x) -> ExpansionCoefficients:
    return q_coefficients(FrameData(g, h, x))


def p1_apply(g: MetricField, h: SymTensorField, phi: ScalarField, x, groups: bool = False):
    """P^(1)_{g,h} phi at the points; with ``groups`` also the per-line split."""
    parts = p1_groups(FrameData(g, h, x, phi))
    total = _total(parts)
    if groups:
        return total, {k: v.value for k, v in parts.items()}
    return total


def p1_sphere_apply(h: SymTensorField, phi: ScalarField, x) -> np.ndarray:
    return _total(p1_sphere_groups(FrameData(MetricField.round(), h, x, phi)))


def p1_one(g: MetricField, h: SymTensorField, x) -> np.ndarray:
    return p1_apply(g, h, ScalarField.constant(1.0), x)


def p2_one(g: MetricField, h: SymTensorField, x) -> np.ndarray:
    return _total(p2_one_groups(FrameData(g, h, x)))


def adjoint_defect_residual(g: MetricField, h: SymTensorField, phi: ScalarField, psi: ScalarField,
                            quadrature) -> float:
    """int (P1 phi) psi - phi (P1 psi) + 1/2 (P phi psi - phi P psi) tr h  dmu.

    ``quadrature`` provides ``points`` (N, 3) and ``weights`` (N,) for dx and an
    optional ``chunks`` size; the g-measure is applied here.
    """
    x, w = quadrature.points, quadrature.weights
    chunk = getattr(quadrature, "chunk", 4096)
    total = 0.0
    for s in range(0, len(x), chunk):
        xs, ws = x[s:s + chunk], w[s:s + chunk]
        da = FrameData(g, h, xs, phi)
        db = da.with_phi(psi)
        p1a = _total(p1_groups(da))
        p1b = _total(p1_groups(db))
        pa = da.geo.paneitz(da.phi).value
        pb = da.geo.paneitz(db.phi).value
        a, b = da.phi.value, db.phi.value
        vol = np.sqrt(np.linalg.det(da.geo.g.value))
        integrand = p1a * b - a * p1b + 0.5 * (pa * b - a * pb) * da.trh.value
        total += float(np.sum(integrand * vol * ws))
    return total


# ---------------------------------------------------------------------------
# exact quantities of g + t h in the background frame


def _lower_axis(F: np.ndarray, T: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(T, axis, -1)
    batch = F.shape[:-2]
    Fb = F.reshape(batch + (1,) * (moved.ndim - len(batch) - 1) + (3, 3))
    return np.moveaxis(np.einsum("...az,...z->...a", Fb, moved), -1, axis)


def _riemann_frame(d: FrameData, mine: np.ndarray) -> np.ndarray:
    """Frame components of the Riemann tensor with its first two lower indices swapped."""
    F, L = d.frame_arrays()
    Rm = np.swapaxes(mine, -3, -2)
    return np.einsum("...zl,...ai,...bj,...ck,...zijk->...labc", L, F, F, F, Rm, optimize=True)


def exact_value(selector: str, d: FrameData, t: float) -> np.ndarray:
    """The quantity named by ``selector`` for g + t h, in the background frame."""
    metric_t = d.metric.perturbed(d.h_field, t)
    geo = metric_t.geometry(d.x, d.order)
    F, L = d.frame_arrays()
    if selector == "measure":
        return np.sqrt(np.linalg.det(geo.g.value) / np.linalg.det(d.geo.g.value))
    if selector == "christoffel":
        diff = geo.gamma.value - d.geo.gamma.value
        return np.einsum("...zc,...ai,...bj,...zij->...cab", L, F, F, diff, optimize=True)
    if selector == "riemann":
        return _riemann_frame(d, geo.riemann.value)
    if selector == "ricci":
        return _lower_axis(F, _lower_axis(F, geo.ricci.value, -2), -1)
    if selector == "scalar":
        return geo.scalar.value
    if selector == "laplacian":
        return geo.laplacian(d.phi.truncate(2)).value
    if selector == "scalar_squared":
        return geo.scalar.value ** 2
    if selector == "ricci_norm2":
        return geo.ricci_norm2.value
    if selector == "laplacian_scalar":
        return geo.lap_scalar.value
    if selector == "q":
        return geo.q_curvature.value
    if selector == "paneitz":
        return geo.paneitz(d.phi).value
    if selector == "paneitz_one":
        return geo.paneitz(Jet.constant(np.ones(d.batch), d.order)).value
    raise KeyError(f"unknown selector {selector!r}")


@dataclass
class FdReport:
    selector: str
    t: tuple[float, ...]
    remainders: np.ndarray
    slope: float
    passed: bool

    def as_dict(self) -> dict:
        return {"selector": self.selector, "t": list(self.t),
                "remainders": [float(r) for r in self.remainders],
                "slope": float(self.slope), "passed": bool(self.passed)}


def remainder_slope(t: Sequence[float], remainders: Sequence[float]) -> float:
    """Least-squares slope of log(remainder) against log(t)."""
    lt = np.log(np.asarray(t, dtype=float))
    lr = np.log(np.maximum(np.asarray(remainders, dtype=float), 1e-300))
    return float(np.polyfit(lt, lr, 1)[0])


def fd_validate(selector: str, g: MetricField, h: SymTensorField, x, phi: ScalarField | None = None,
                t_grid: Sequence[float] = T_GRID,
                slope_range: tuple[float, float] = SLOPE_RANGE) -> FdReport:
    """Remainder of the second-order expansion against the exact quantity.

    For ``paneitz`` only the first-order coefficient is known, so the odd part
    (P(t) - P(-t))/2 - t P^(1) phi is used; its remainder is also O(t^3).
    """
    if selector not in COEFFICIENTS:
        raise KeyError(f"unknown selector {selector!r}")
    if selector in NEEDS_PHI and phi is None:
        raise ValueError(f"selector {selector!r} needs a test function")
    d = FrameData(g, h, x, phi)
    coeffs = COEFFICIENTS[selector](d)
    rem = []
    for t in t_grid:
        if selector == "paneitz":
            odd = 0.5 * (exact_value(selector, d, t) - exact_value(selector, d, -t))
            diff = odd - t * coeffs.order1
        else:
            diff = exact_value(selector, d, t) - coeffs.predict(t)
        rem.append(float(np.max(np.abs(diff))))
    rem = np.array(rem)
    slope = remainder_slope(t_grid, rem)
    lo, hi = slope_range
    return FdReport(selector, tuple(float(t) for t in t_grid), rem, slope, bool(lo <= slope <= hi))
