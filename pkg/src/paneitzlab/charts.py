"""The two stereographic charts of the unit sphere S^3 in R^4.

The north chart ``x`` misses N = (0, 0, 0, 1) and sends x = 0 to S; the south
chart ``y`` misses S and sends y = 0 to N.  The transition map is the
inversion y = x / |x|^2 in both directions, and both charts carry the round
metric tau^-4 |dx|^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import jets as J
from .fields import (FieldError, ScalarField, SymTensorField, VectorFieldChart, _ensure_jet,
                     tau_jet)
from .jets import Jet

NORTH = np.array([0.0, 0.0, 0.0, 1.0])
SOUTH = np.array([0.0, 0.0, 0.0, -1.0])


def embedding_jets(X: Sequence[Jet], chart: str = "N") -> list[Jet]:
    """Ambient coordinates p(x) in R^4 of chart point x (jets)."""
    r2 = X[0] * X[0] + X[1] * X[1] + X[2] * X[2]
    inv = (r2 + 1.0).reciprocal()
    last = (r2 - 1.0) * inv
    if chart == "S":
        last = -last
    return [2.0 * X[a] * inv for a in range(3)] + [last]


def embedding_jacobian(X: Sequence[Jet], chart: str = "N") -> Jet:
    """d p_a / d x_i stored at [..., i, a] (shape (..., 3, 4)), closed form."""
    r2 = X[0] * X[0] + X[1] * X[1] + X[2] * X[2]
    inv = (r2 + 1.0).reciprocal()
    inv2 = inv * inv
    rows = []
    sign = -1.0 if chart == "S" else 1.0
    for i in range(3):
        row = []
        for a in range(3):
            v = -4.0 * X[i] * X[a] * inv2
            if a == i:
                v = v + 2.0 * inv
            row.append(v)
        row.append(sign * 4.0 * X[i] * inv2)
        rows.append(J.stack(row, axis=-1))
    return J.stack(rows, axis=-2)


def to_sphere(x, chart: str = "N") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    p = np.concatenate([2 * x / (1 + r2)[..., None], ((r2 - 1) / (r2 + 1))[..., None]], axis=-1)
    if chart == "S":
        p[..., 3] *= -1
    return p


def from_sphere(p, chart: str = "N") -> np.ndarray:
    """Chart coordinates of ambient point p (the chart's own pole is not allowed)."""
    p = np.asarray(p, dtype=float)
    last = p[..., 3] if chart == "N" else -p[..., 3]
    denom = 1.0 - last
    if np.any(denom <= 1e-300):
        raise FieldError(f"point is the pole of chart {chart}")
    return p[..., :3] / denom[..., None]


def inversion_jets(X: Sequence[Jet]) -> list[Jet]:
    r2 = X[0] * X[0] + X[1] * X[1] + X[2] * X[2]
    inv = r2.reciprocal()
    return [X[a] * inv for a in range(3)]


def inversion_jacobian(X: Sequence[Jet]) -> Jet:
    """d(x/|x|^2)_a / d x_i = delta_ia / r^2 - 2 x_i x_a / r^4 (symmetric)."""
    r2 = X[0] * X[0] + X[1] * X[1] + X[2] * X[2]
    inv = r2.reciprocal()
    inv2 = inv * inv
    rows = []
    for i in range(3):
        row = []
        for a in range(3):
            v = -2.0 * X[i] * X[a] * inv2
            if a == i:
                v = v + inv
            row.append(v)
        rows.append(J.stack(row, axis=-1))
    return J.stack(rows, axis=-2)


def pole_to_chart(pole, chart: str = "N") -> np.ndarray:
    """Resolve 'N'/'S' literals or an ambient/chart vector to chart coordinates."""
    if isinstance(pole, str):
        key = pole.strip().upper()
        if key == "S":
            return np.zeros(3) if chart == "N" else None
        if key == "N":
            return np.zeros(3) if chart == "S" else None
        raise FieldError(f"unknown pole literal {pole!r}")
    v = np.asarray(pole, dtype=float)
    if v.shape == (3,):
        return v if chart == "N" else from_sphere(to_sphere(v), "S")
    if v.shape == (4,):
        return from_sphere(v / np.linalg.norm(v), chart)
    raise FieldError("pole must be 'N', 'S', a chart 3-vector or an ambient 4-vector")


def pole_to_sphere(pole) -> np.ndarray:
    if isinstance(pole, str):
        key = pole.strip().upper()
        if key == "N":
            return NORTH.copy()
        if key == "S":
            return SOUTH.copy()
        raise FieldError(f"unknown pole literal {pole!r}")
    v = np.asarray(pole, dtype=float)
    if v.shape == (3,):
        return to_sphere(v)
    if v.shape == (4,):
        return v / np.linalg.norm(v)
    raise FieldError("pole must be 'N', 'S', a chart 3-vector or an ambient 4-vector")


# ---------------------------------------------------------------------------
# change of chart for chart-native fields


def _composed(field_jet: Callable[[np.ndarray, int], Jet], y: np.ndarray, k: int):
    Y = J.coordinates(y, k)
    Xj = inversion_jets(Y)
    x0 = np.stack([c.value for c in Xj], axis=-1)
    return Y, J.compose(field_jet(x0, k), Xj)


def _safe_points(y: np.ndarray, rapid: bool):
    r2 = np.sum(y * y, axis=-1)
    at_pole = r2 < 1e-24
    if np.any(at_pole) and not rapid:
        raise FieldError("field is only known on the other chart; it is not defined at this pole")
    y = np.where(at_pole[..., None], 1.0, y)
    return y, at_pole


def invert_scalar(f: ScalarField) -> ScalarField:
    """Represent a scalar of one chart in the other chart (same function on S^3)."""
    rapid = f.decay_exponent == -math.inf

    def evaluator(y, k):
        y, at_pole = _safe_points(y, rapid)
        _, out = _composed(f.jet, y, k)
        out.c[at_pole] = 0.0
        return out

    return ScalarField(evaluator, math.inf, f.derivative_order_available, name=f"inv({f.name})")


def invert_tensor(h: SymTensorField) -> SymTensorField:
    """Pull a (0,2) tensor back through the inversion x = y / |y|^2."""
    rapid = h.decay_exponent == -math.inf

    def evaluator(y, k):
        y, at_pole = _safe_points(y, rapid)
        Y, hy = _composed(h.jet, y, k)
        jac = inversion_jacobian(Y)
        out = J.einsum("ia,ij->aj", jac, hy)
        out = J.einsum("aj,jb->ab", out, jac)
        out.c[at_pole] = 0.0
        return out

    return SymTensorField(evaluator, math.inf, h.derivative_order_available,
                          f"inv({h.name})", h.on_sphere)


def invert_vector(X: VectorFieldChart) -> VectorFieldChart:
    """Push a vector field forward through the inversion (an involution)."""
    rapid = X.decay_exponent == -math.inf

    def evaluator(y, k):
        y, at_pole = _safe_points(y, rapid)
        Y, xy = _composed(X.jet, y, k)
        jac = inversion_jacobian(Y)
        out = J.einsum("ai,i->a", jac, xy)
        out.c[at_pole] = 0.0
        return out

    return VectorFieldChart(evaluator, math.inf, X.derivative_order_available, f"inv({X.name})")


# ---------------------------------------------------------------------------
# objects living on S^3, with a representative in each chart


@dataclass(frozen=True)
class SphereScalar:
    north: ScalarField
    south: ScalarField
    name: str = ""

    def chart(self, c: str) -> ScalarField:
        return self.north if c == "N" else self.south

    def at(self, p) -> np.ndarray:
        """Values at ambient points p (shape (..., 4))."""
        p = np.asarray(p, dtype=float)
        use_n = p[..., 3] <= 0
        out = np.empty(p.shape[:-1])
        if np.any(use_n):
            out[use_n] = self.north(from_sphere(p[use_n], "N"))
        if np.any(~use_n):
            out[~use_n] = self.south(from_sphere(p[~use_n], "S"))
        return out


@dataclass(frozen=True)
class SphereTensor:
    north: SymTensorField
    south: SymTensorField
    name: str = ""

    def chart(self, c: str) -> SymTensorField:
        return self.north if c == "N" else self.south

    def __add__(self, other: "SphereTensor") -> "SphereTensor":
        return SphereTensor(self.north + other.north, self.south + other.south,
                            f"({self.name}+{other.name})")

    def __sub__(self, other: "SphereTensor") -> "SphereTensor":
        return SphereTensor(self.north - other.north, self.south - other.south,
                            f"({self.name}-{other.name})")

    def __rmul__(self, c: float) -> "SphereTensor":
        return SphereTensor(float(c) * self.north, float(c) * self.south, self.name)


@dataclass(frozen=True)
class SphereVector:
    north: VectorFieldChart
    south: VectorFieldChart
    name: str = ""

    def chart(self, c: str) -> VectorFieldChart:
        return self.north if c == "N" else self.south


AmbientScalarFn = Callable[[list[Jet]], Jet | float]
AmbientTensorFn = Callable[[list[Jet]], Jet]
AmbientVectorFn = Callable[[list[Jet]], Sequence[Jet]]


def sphere_scalar(fn: AmbientScalarFn, name: str = "") -> SphereScalar:
    """Scalar on S^3 from a function of the ambient coordinates p_1..p_4 (jets)."""

    def make(chart):
        def evaluator(x, k):
            return _ensure_jet(fn(embedding_jets(J.coordinates(x, k), chart)), x, k)

        return ScalarField(evaluator, 0.0, name=f"{name}[{chart}]")

    return SphereScalar(make("N"), make("S"), name)


def sphere_tensor(fn: AmbientTensorFn, name: str = "") -> SphereTensor:
    """Restriction of an ambient symmetric 4x4 tensor field A(p) to S^3.

    Chart components are h_ij = A_ab(p(x)) dp_a/dx_i dp_b/dx_j.
    """

    def make(chart):
        def evaluator(x, k):
            X = J.coordinates(x, k)
            p = embedding_jets(X, chart)
            A = fn(p)
            if A.shape != x.shape[:-1] + (4, 4):
                A = Jet(np.broadcast_to(A.c, x.shape[:-1] + (4, 4) + A.c.shape[-1:]).copy(), A.order)
            dp = embedding_jacobian(X, chart)
            t = J.einsum("ia,ab->ib", dp, A)
            return J.einsum("ib,jb->ij", t, dp)

        return SymTensorField(evaluator, -4.0, name=f"{name}[{chart}]", on_sphere=True)

    return SphereTensor(make("N"), make("S"), name)


def sphere_vector(fn: AmbientVectorFn, name: str = "") -> SphereVector:
    """Tangential part of an ambient vector field V(p), in chart components.

    X^i = g^ij <dp/dx_j, V> = tau^4 sum_a dp_a/dx_i V_a.
    """

    def make(chart):
        def evaluator(x, k):
            X = J.coordinates(x, k)
            p = embedding_jets(X, chart)
            V = J.stack([_ensure_jet(v, x, k) for v in fn(p)], axis=-1)
            dp = embedding_jacobian(X, chart)
            t4 = tau_jet(X) ** 4
            return J.einsum("ia,a->i", dp, V) * t4.expand_dims(-1)

        return VectorFieldChart(evaluator, 2.0, name=f"{name}[{chart}]")

    return SphereVector(make("N"), make("S"), name)


def from_north_tensor(h: SymTensorField, name: str = "") -> SphereTensor:
    """Sphere tensor from a north-chart representative (must vanish to all orders at N)."""
    return SphereTensor(h, invert_tensor(h), name or h.name)


def from_north_scalar(f: ScalarField, name: str = "") -> SphereScalar:
    return SphereScalar(f, invert_scalar(f), name or f.name)


def round_metric_tensor() -> SphereTensor:
    """The round metric itself as a sphere tensor (ambient identity restricted)."""
    return sphere_tensor(lambda p: J.einsum(",ab->ab", p[0] * 0.0 + 1.0, np.eye(4)), "g")
