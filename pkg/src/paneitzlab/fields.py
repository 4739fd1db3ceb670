"""Scalar, vector and symmetric-tensor fields on the stereographic chart of S^3.

Every field is described by an evaluator ``(points, order) -> Jet`` returning
Taylor jets about each point.  Analytic fields build their jets from closed
forms, so all partials are exact; grid fields build them from fourth-order
central stencils.  The flat-chart index expressions used throughout (double
divergence, Lichnerowicz-type combination) are assembled from these jets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import jets as J
from .jets import Jet
from .stencils import central_stencil, stencil_margin

Evaluator = Callable[[np.ndarray, int], Jet]

DEFAULT_AVAILABILITY = 8
RAY_RADII = (10.0, 20.0, 40.0)


class FieldError(ValueError):
    """Invalid field evaluation (order too high, point outside grid, ...)."""


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise FieldError(f"chart points need a trailing axis of length 3, got {x.shape}")
    return x


def _ensure_jet(value, points: np.ndarray, order: int) -> Jet:
    if isinstance(value, Jet):
        if value.shape != points.shape[:-1]:
            value = Jet(np.broadcast_to(value.c, points.shape[:-1] + value.c.shape[-1:]).copy(), value.order)
        return value
    return Jet.constant(np.broadcast_to(np.asarray(value, dtype=float), points.shape[:-1]), order)


def _decay_sum(a: float, b: float) -> float:
    if a == -math.inf or b == -math.inf:
        return -math.inf
    return a + b


# ---------------------------------------------------------------------------
# scalar fields


@dataclass(frozen=True)
class ScalarField:
    """Smooth function on the chart with jets to ``derivative_order_available``."""

    evaluator: Evaluator
    decay_exponent: float = math.inf
    derivative_order_available: int = DEFAULT_AVAILABILITY
    representation: str = "analytic"
    name: str = ""

    @staticmethod
    def from_expression(fn: Callable[[list[Jet]], Jet | float], decay_exponent: float = math.inf,
                        name: str = "") -> "ScalarField":
        """Field from a closed form written in jet arithmetic of the coordinates."""

        def evaluator(x, order):
            return _ensure_jet(fn(J.coordinates(x, order)), x, order)

        return ScalarField(evaluator, decay_exponent, name=name)

    @staticmethod
    def constant(value: float) -> "ScalarField":
        decay = 0.0 if value != 0 else -math.inf
        return ScalarField(lambda x, k: Jet.constant(np.full(x.shape[:-1], float(value)), k),
                           decay, name=f"const({value})")

    def jet(self, x, order: int) -> Jet:
        if order > self.derivative_order_available:
            raise FieldError(f"derivative order {order} exceeds availability "
                             f"{self.derivative_order_available} of field {self.name or '<anon>'}")
        x = _as_points(x)
        return self.evaluator(x, order)

    def __call__(self, x) -> np.ndarray:
        return self.jet(x, 0).value

    def derivative(self, axis: int) -> "ScalarField":
        return ScalarField(lambda x, k: self.jet(x, k + 1).d(axis), self.decay_exponent - 1,
                           self.derivative_order_available - 1, self.representation,
                           f"d{axis}({self.name})")

    def map(self, fn: Callable[[Jet], Jet], decay_exponent: float = math.inf, name: str = "") -> "ScalarField":
        return ScalarField(lambda x, k: fn(self.jet(x, k)), decay_exponent,
                           self.derivative_order_available, self.representation, name)

    def _binary(self, other, op, decay, name):
        if isinstance(other, ScalarField):
            avail = min(self.derivative_order_available, other.derivative_order_available)
            rep = self.representation if self.representation == other.representation else "analytic"
            return ScalarField(lambda x, k: op(self.jet(x, k), other.jet(x, k)), decay, avail, rep, name)
        c = float(other)
        return ScalarField(lambda x, k: op(self.jet(x, k), c), decay,
                           self.derivative_order_available, self.representation, name)

    def __add__(self, other):
        d = max(self.decay_exponent, other.decay_exponent if isinstance(other, ScalarField)
                else (0.0 if float(other) != 0 else -math.inf))
        return self._binary(other, lambda a, b: a + b, d, "sum")

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            d = _decay_sum(self.decay_exponent, other.decay_exponent)
        else:
            d = self.decay_exponent if float(other) != 0 else -math.inf
        return self._binary(other, lambda a, b: a * b, d, "product")

    __rmul__ = __mul__


def partial(f: ScalarField, multi_index: Sequence[int], x) -> np.ndarray:
    """Partial derivative of ``f`` along the listed axes (0-based, any order) at ``x``."""
    alpha = [0, 0, 0]
    for a in multi_index:
        if a not in (0, 1, 2):
            raise FieldError(f"axis index {a} outside 0..2")
        alpha[a] += 1
    if sum(alpha) > 4:
        raise FieldError("partials are supported up to total order 4")
    return f.jet(x, sum(alpha)).partial(alpha)


def coordinate(axis: int) -> ScalarField:
    return ScalarField.from_expression(lambda X: X[axis], 1.0, name=f"x{axis}")


def tau() -> ScalarField:
    """Conformal factor sqrt((|x|^2 + 1) / 2) relating the round and flat metrics."""
    return ScalarField.from_expression(lambda X: tau_jet(X), 1.0, name="tau")


def tau_jet(X: Sequence[Jet]) -> Jet:
    return ((X[0] * X[0] + X[1] * X[1] + X[2] * X[2] + 1.0) * 0.5).sqrt()


# ---------------------------------------------------------------------------
# grid fields


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid origin + spacing * index, index in [0, n) on each axis."""

    n: tuple[int, int, int]
    spacing: float
    origin: tuple[float, float, float]

    @staticmethod
    def cube(radius: float, points: int, periodic: bool = False) -> "GridSpec":
        """Grid on [-R, R]^3; with ``periodic`` the endpoint R is dropped."""
        if points < 5:
            raise FieldError("a grid needs at least 5 points per axis")
        if radius <= 0:
            raise FieldError("grid radius must be positive")
        h = 2.0 * radius / (points if periodic else points - 1)
        return GridSpec((points,) * 3, h, (-radius,) * 3)

    def axes(self) -> list[np.ndarray]:
        return [self.origin[a] + self.spacing * np.arange(self.n[a]) for a in range(3)]

    def points(self) -> np.ndarray:
        ax = self.axes()
        return np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1)

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3


@dataclass(frozen=True)
class GridScalarField:
    """Samples on a uniform grid; derivatives from fourth-order central stencils."""

    values: np.ndarray
    grid: GridSpec
    decay_exponent: float = math.inf
    name: str = "grid"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    derivative_order_available = 4
    representation = "grid"

    @staticmethod
    def sample(f: ScalarField, grid: GridSpec) -> "GridScalarField":
        return GridScalarField(np.ascontiguousarray(f(grid.points())), grid, f.decay_exponent,
                               f"grid({f.name})")

    def derivative_array(self, alpha: Sequence[int]) -> np.ndarray:
        """d^alpha on the whole grid; entries within the stencil margin are NaN."""
        alpha = tuple(int(a) for a in alpha)
        if sum(alpha) > 4:
            raise FieldError("grid derivatives are supported up to total order 4")
        if alpha in self._cache:
            return self._cache[alpha]
        out = self.values
        for axis, d in enumerate(alpha):
            if d == 0:
                continue
            offs, w = central_stencil(d)
            m = int(np.abs(offs).max())
            n = out.shape[axis]
            acc = np.zeros_like(out)
            core = [slice(None)] * 3
            core[axis] = slice(m, n - m)
            for o, wt in zip(offs, w):
                if wt == 0.0:
                    continue
                src = [slice(None)] * 3
                src[axis] = slice(m + o, n - m + o)
                acc[tuple(core)] += wt * out[tuple(src)]
            for side in (slice(0, m), slice(n - m, n)):
                edge = [slice(None)] * 3
                edge[axis] = side
                acc[tuple(edge)] = np.nan
            out = acc / self.grid.spacing ** d
        self._cache[alpha] = out
        return out

    def _indices(self, x: np.ndarray, margin: int) -> tuple[np.ndarray, ...]:
        rel = (x - np.asarray(self.grid.origin)) / self.grid.spacing
        idx = np.rint(rel)
        if np.any(np.abs(rel - idx) > 1e-6):
            raise FieldError("grid fields can only be evaluated at grid nodes")
        idx = idx.astype(int)
        n = np.asarray(self.grid.n)
        if np.any(idx < margin) or np.any(idx > n - 1 - margin):
            raise FieldError(f"point closer than {margin} cells to the grid boundary")
        return tuple(idx[..., a] for a in range(3))

    def jet(self, x, order: int) -> Jet:
        if order > 4:
            raise FieldError(f"derivative order {order} exceeds grid availability 4")
        x = _as_points(x)
        idx = self._indices(x, stencil_margin(order))
        c = np.zeros(x.shape[:-1] + (J.n_monomials(order),))
        for i, m in enumerate(J.monomials(order)):
            weight = float(np.prod([math.factorial(a) for a in m]))
            c[..., i] = self.derivative_array(m)[idx] / weight
        return Jet(c, order)

    def __call__(self, x) -> np.ndarray:
        return self.jet(x, 0).value

    def as_field(self) -> ScalarField:
        return ScalarField(self.jet, self.decay_exponent, 4, "grid", self.name)


# ---------------------------------------------------------------------------
# vector and symmetric tensor fields


def _symmetrize(t: Jet) -> Jet:
    c = t.c.copy()
    for i in range(3):
        for j in range(i):
            c[..., i, j, :] = c[..., j, i, :]
    return Jet(c, t.order)


@dataclass(frozen=True)
class VectorFieldChart:
    """Chart vector field X = X_i d/dx_i; evaluator returns jets of shape (..., 3)."""

    evaluator: Evaluator
    decay_exponent: float = math.inf
    derivative_order_available: int = DEFAULT_AVAILABILITY
    name: str = ""

    @staticmethod
    def from_components(components: Sequence[ScalarField], name: str = "") -> "VectorFieldChart":
        comps = list(components)
        return VectorFieldChart(
            lambda x, k: J.stack([c.jet(x, k) for c in comps], axis=-1),
            max(c.decay_exponent for c in comps),
            min(c.derivative_order_available for c in comps), name)

    @staticmethod
    def from_expression(fn: Callable[[list[Jet]], Sequence[Jet]], decay_exponent: float = math.inf,
                        name: str = "") -> "VectorFieldChart":
        def evaluator(x, order):
            vals = fn(J.coordinates(x, order))
            return J.stack([_ensure_jet(v, x, order) for v in vals], axis=-1)

        return VectorFieldChart(evaluator, decay_exponent, name=name)

    def jet(self, x, order: int) -> Jet:
        if order > self.derivative_order_available:
            raise FieldError(f"derivative order {order} exceeds availability {self.derivative_order_available}")
        return self.evaluator(_as_points(x), order)

    def component(self, i: int) -> ScalarField:
        return ScalarField(lambda x, k: self.jet(x, k)[..., i], self.decay_exponent,
                           self.derivative_order_available, name=f"{self.name}[{i}]")

    def __call__(self, x) -> np.ndarray:
        return self.jet(x, 0).value

    def __add__(self, other: "VectorFieldChart") -> "VectorFieldChart":
        return VectorFieldChart(lambda x, k: self.jet(x, k) + other.jet(x, k),
                                max(self.decay_exponent, other.decay_exponent),
                                min(self.derivative_order_available, other.derivative_order_available),
                                "sum")

    def __rmul__(self, c: float) -> "VectorFieldChart":
        return VectorFieldChart(lambda x, k: self.jet(x, k) * float(c), self.decay_exponent,
                                self.derivative_order_available, self.name)


UPPER = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


@dataclass(frozen=True)
class SymTensorField:
    """Symmetric (0,2) tensor; evaluator returns jets of shape (..., 3, 3).

    Only the upper triangle of the evaluator output is read; the lower
    triangle is copied from it, so h(i, j) == h(j, i) exactly.
    """

    evaluator: Evaluator
    decay_exponent: float = math.inf
    derivative_order_available: int = DEFAULT_AVAILABILITY
    name: str = ""
    on_sphere: bool = False

    @staticmethod
    def from_components(components: dict[tuple[int, int], ScalarField] | Sequence[ScalarField],
                        name: str = "", on_sphere: bool = False) -> "SymTensorField":
        """Build from the six components h11, h12, h13, h22, h23, h33 (dict or sequence)."""
        if not isinstance(components, dict):
            components = dict(zip(UPPER, components))
        comps = {}
        for (i, j), f in components.items():
            comps[(min(i, j), max(i, j))] = f
        zero = ScalarField.constant(0.0)
        full = [comps.get(ij, zero) for ij in UPPER]

        def evaluator(x, k):
            vals = {ij: f.jet(x, k) for ij, f in zip(UPPER, full)}
            rows = [[vals[(min(i, j), max(i, j))] for j in range(3)] for i in range(3)]
            return J.stack([J.stack(r, axis=-1) for r in rows], axis=-2)

        return SymTensorField(evaluator, max(f.decay_exponent for f in full),
                              min(f.derivative_order_available for f in full), name, on_sphere)

    @staticmethod
    def from_expression(fn: Callable[[list[Jet]], Jet], decay_exponent: float = math.inf,
                        name: str = "", on_sphere: bool = False) -> "SymTensorField":
        """Field from a closed form returning a jet of shape (..., 3, 3)."""
        return SymTensorField(lambda x, k: fn(J.coordinates(x, k)), decay_exponent,
                              name=name, on_sphere=on_sphere)

    @staticmethod
    def zero() -> "SymTensorField":
        return SymTensorField(lambda x, k: Jet.zeros(x.shape[:-1] + (3, 3), k), -math.inf, name="0")

    def jet(self, x, order: int) -> Jet:
        if order > self.derivative_order_available:
            raise FieldError(f"derivative order {order} exceeds availability "
                             f"{self.derivative_order_available} of {self.name or '<anon>'}")
        x = _as_points(x)
        t = self.evaluator(x, order)
        if t.shape != x.shape[:-1] + (3, 3):
            raise FieldError(f"tensor evaluator returned shape {t.shape}")
        return _symmetrize(t)

    def __call__(self, x) -> np.ndarray:
        return self.jet(x, 0).value

    def component(self, i: int, j: int) -> ScalarField:
        i, j = min(i, j), max(i, j)
        return ScalarField(lambda x, k: self.jet(x, k)[..., i, j], self.decay_exponent,
                           self.derivative_order_available, name=f"{self.name}[{i}{j}]")

    def _combine(self, other, op, decay, name):
        return SymTensorField(lambda x, k: op(self.jet(x, k), other.jet(x, k)), decay,
                              min(self.derivative_order_available, other.derivative_order_available),
                              name, self.on_sphere and other.on_sphere)

    def __add__(self, other: "SymTensorField") -> "SymTensorField":
        return self._combine(other, lambda a, b: a + b, max(self.decay_exponent, other.decay_exponent),
                             f"({self.name}+{other.name})")

    def __sub__(self, other: "SymTensorField") -> "SymTensorField":
        return self._combine(other, lambda a, b: a - b, max(self.decay_exponent, other.decay_exponent),
                             f"({self.name}-{other.name})")

    def __mul__(self, c):
        if isinstance(c, ScalarField):
            return SymTensorField(lambda x, k: self.jet(x, k) * c.jet(x, k).expand_dims(-1).expand_dims(-1),
                                  _decay_sum(self.decay_exponent, c.decay_exponent),
                                  min(self.derivative_order_available, c.derivative_order_available),
                                  f"{c.name}*{self.name}", self.on_sphere)
        c = float(c)
        return SymTensorField(lambda x, k: self.jet(x, k) * c,
                              self.decay_exponent if c != 0 else -math.inf,
                              self.derivative_order_available, self.name, self.on_sphere)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def with_name(self, name: str) -> "SymTensorField":
        return SymTensorField(self.evaluator, self.decay_exponent, self.derivative_order_available,
                              name, self.on_sphere)


def sample_tensor_on_grid(h: SymTensorField, grid: GridSpec) -> SymTensorField:
    """Grid representation of ``h``: samples of the six components, stencil derivatives."""
    pts = grid.points()
    vals = h.jet(pts, 0).value
    comps = [GridScalarField(np.ascontiguousarray(vals[..., i, j]), grid, h.decay_exponent).as_field()
             for i, j in UPPER]
    return SymTensorField.from_components(comps, name=f"grid({h.name})")


# ---------------------------------------------------------------------------
# flat-chart index expressions


def second_derivatives(theta: Jet) -> Jet:
    """Jet of d_b d_a theta_ij stored at [..., i, j, a, b] (order drops by 2)."""
    return theta.grad().grad()


def lichnerowicz_jet(theta: Jet) -> Jet:
    """M_ij = theta_ikjk + theta_jkik - (tr theta)_ij - Lap theta_ij from jets of order >= 2."""
    d2 = second_derivatives(theta)
    a = J.einsum("ikjk->ij", d2)
    tr = J.einsum("kkij->ij", d2)
    lap = J.einsum("ijkk->ij", d2)
    return a + a.swapaxes(-1, -2) - tr - lap


def double_divergence_jet(theta: Jet) -> Jet:
    """s = theta_ijij - Lap tr theta from jets of order >= 2."""
    d2 = second_derivatives(theta)
    return J.einsum("ijij->", d2) - J.einsum("iikk->", d2)


def tensor_divergence(h: SymTensorField, x) -> np.ndarray:
    """(div h)_i = sum_j d_j h_ij in the flat chart."""
    d = h.jet(x, 1).grad()
    return J.einsum("ijj->i", d).value


def double_divergence_minus_laplacian_trace(theta: SymTensorField, x) -> np.ndarray:
    return double_divergence_jet(theta.jet(x, 2)).value


def lichnerowicz_combination(theta: SymTensorField, x) -> np.ndarray:
    return lichnerowicz_jet(theta.jet(x, 2)).value


# ---------------------------------------------------------------------------
# geometric constructions


def pullback_theta(h: SymTensorField) -> SymTensorField:
    """theta = tau^4 h."""

    def evaluator(x, k):
        t4 = tau_jet(J.coordinates(x, k)) ** 4
        return h.jet(x, k) * t4.expand_dims(-1).expand_dims(-1)

    return SymTensorField(evaluator, h.decay_exponent + 4, h.derivative_order_available,
                          f"theta({h.name})", h.on_sphere)


def push_h(theta: SymTensorField) -> SymTensorField:
    """Inverse of ``pullback_theta``: h = tau^-4 theta."""

    def evaluator(x, k):
        tm4 = tau_jet(J.coordinates(x, k)) ** -4
        return theta.jet(x, k) * tm4.expand_dims(-1).expand_dims(-1)

    return SymTensorField(evaluator, theta.decay_exponent - 4, theta.derivative_order_available,
                          f"h({theta.name})", theta.on_sphere)


def lie_derivative_round(X: VectorFieldChart) -> SymTensorField:
    """kappa = tau^4 L_X g for the round metric g = tau^-4 |dx|^2.

    kappa_ij = -4 tau^-1 (X tau) delta_ij + d_j X_i + d_i X_j.
    """

    def evaluator(x, k):
        coords = J.coordinates(x, k + 1)
        t = tau_jet(coords)
        xj = X.jet(x, k + 1)
        xt = J.einsum("i,i->", xj.truncate(k), t.grad())
        scal = -4.0 * xt / t.truncate(k)
        dx = xj.grad()
        eye = np.eye(3)
        return dx + dx.swapaxes(-1, -2) + J.einsum(",ij->ij", scal, eye)

    return SymTensorField(evaluator, X.decay_exponent - 1, X.derivative_order_available - 1,
                          f"L({X.name})", True)


def conformal_direction(f: ScalarField) -> SymTensorField:
    """h = f g = f tau^-4 delta_ij in chart components."""

    def evaluator(x, k):
        s = f.jet(x, k) * tau_jet(J.coordinates(x, k)) ** -4
        return J.einsum(",ij->ij", s, np.eye(3))

    return SymTensorField(evaluator, _decay_sum(f.decay_exponent, -4.0), f.derivative_order_available,
                          f"conf({f.name})", True)


def pure_trace(f: ScalarField) -> SymTensorField:
    """theta = f delta_ij."""
    return SymTensorField(lambda x, k: J.einsum(",ij->ij", f.jet(x, k), np.eye(3)),
                          f.decay_exponent, f.derivative_order_available, f"trace({f.name})")


# ---------------------------------------------------------------------------
# decay audit


def ray_directions() -> np.ndarray:
    """13 directions: 3 axes, 6 face diagonals, 4 body diagonals."""
    dirs = [np.eye(3)[i] for i in range(3)]
    for i in range(3):
        for j in range(i + 1, 3):
            for s in (1.0, -1.0):
                v = np.zeros(3)
                v[i], v[j] = 1.0, s
                dirs.append(v / np.sqrt(2))
    for s2 in (1.0, -1.0):
        for s3 in (1.0, -1.0):
            dirs.append(np.array([1.0, s2, s3]) / np.sqrt(3))
    return np.array(dirs)


@dataclass(frozen=True)
class DecayAudit:
    exponent: float
    slopes: tuple[float, ...]
    passed: bool


def decay_audit(f: ScalarField | SymTensorField | VectorFieldChart, exponent: float,
                max_order: int = 4, radii: Sequence[float] = RAY_RADII, slack: float = 0.25,
                floor: float = 1e-13) -> DecayAudit:
    """Check |d^m f| <= C |x|^(exponent - m) along 13 rays at the given radii.

    For each derivative order m the largest partial magnitude over rays and
    components is fitted against log |x|; the fitted growth rate must not
    exceed exponent - m + slack.  Orders whose partials vanish below
    ``floor`` at every radius pass trivially.
    """
    dirs = ray_directions()
    radii = np.asarray(radii, dtype=float)
    pts = radii[:, None, None] * dirs[None, :, :]
    jet = f.jet(pts, max_order)
    c = jet.c.reshape(len(radii), -1, jet.c.shape[-1])
    mons = J.monomials(max_order)
    slopes = []
    ok = True
    for m in range(max_order + 1):
        cols = [i for i, a in enumerate(mons) if sum(a) == m]
        w = np.array([float(np.prod([math.factorial(v) for v in mons[i]])) for i in cols])
        mag = np.abs(c[:, :, cols] * w).max(axis=(1, 2))
        if np.all(mag <= floor):
            slopes.append(-math.inf)
            continue
        logs = np.log(np.maximum(mag, 1e-300))
        slope = float(np.polyfit(np.log(radii), logs, 1)[0])
        slopes.append(slope)
        if slope > exponent - m + slack:
            ok = False
    return DecayAudit(exponent, tuple(slopes), ok)
