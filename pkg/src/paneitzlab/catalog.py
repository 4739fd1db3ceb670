"""Built-in perturbations, vector fields and conformal factors for the test suites.

Chart tensors theta live on the north chart and decay rapidly; sphere tensors
h are smooth on all of S^3 (restrictions of ambient polynomial tensors, or
pushed forward from rapidly decaying theta).  ``load_field`` reads an INI
field-definition file naming one of these constructors.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import jets as J
from .charts import SphereTensor, from_north_tensor, sphere_tensor
from .fields import (FieldError, GridSpec, ScalarField, SymTensorField, VectorFieldChart, conformal_direction,
                     lie_derivative_round, pullback_theta, push_h, sample_tensor_on_grid, tau_jet)
from .jets import Jet
from .variation import DEFAULT_QUADRATURE, QuadratureConfig

PANELS = QuadratureConfig(method="panels")

UPPER = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def _sym(six) -> np.ndarray:
    a = np.zeros((3, 3))
    for (i, j), v in zip(UPPER, six):
        a[i, j] = a[j, i] = float(v)
    return a


def _r2(X, center=None) -> Jet:
    c = np.zeros(3) if center is None else np.asarray(center, dtype=float)
    d = [X[a] - c[a] for a in range(3)]
    return d[0] * d[0] + d[1] * d[1] + d[2] * d[2]


def _tensor_times(scalar: Jet, A: np.ndarray) -> Jet:
    return J.einsum(",ij->ij", scalar, A)


# ---------------------------------------------------------------------------
# scalars


def gaussian_scalar(width: float = 1.0, center=(0.0, 0.0, 0.0), amplitude: float = 1.0) -> ScalarField:
    return ScalarField.from_expression(
        lambda X: amplitude * (_r2(X, center) * (-1.0 / width ** 2)).exp(), -math.inf, f"gauss(w={width})")


def bump_jet(X, radius: float = 1.0, center=None) -> Jet:
    """exp(1 - 1/(1 - |x - c|^2/rho^2)) inside the ball, 0 outside (smooth, compact)."""
    u = _r2(X, center) * (1.0 / radius ** 2)
    inside = u.value < 1.0 - 1e-6
    out = Jet.zeros(u.shape, u.order)
    if np.any(inside):
        ui = Jet(u.c[inside], u.order)
        out.c[inside] = ((1.0 - ui).reciprocal() * -1.0 + 1.0).exp().c
    return out


def bump_scalar(radius: float = 1.0, center=(0.0, 0.0, 0.0), amplitude: float = 1.0) -> ScalarField:
    return ScalarField.from_expression(lambda X: amplitude * bump_jet(X, radius, center), -math.inf,
                                       f"bump(r={radius})")


def tau_power(k: float) -> ScalarField:
    """tau^k; tau^-2 = 2 / (|x|^2 + 1) is smooth on S^3."""
    return ScalarField.from_expression(lambda X: tau_jet(X) ** k, float(k), f"tau^{k}")


# ---------------------------------------------------------------------------
# chart tensors theta


def gaussian_theta(A, width: float = 1.0, center=(0.0, 0.0, 0.0)) -> SymTensorField:
    """theta = A exp(-|x - c|^2 / w^2) with a constant symmetric A (3x3 or six upper entries)."""
    A = np.asarray(A, dtype=float)
    A = _sym(A) if A.shape == (6,) else 0.5 * (A + A.T)

    def ev(x, k):
        X = J.coordinates(x, k)
        return _tensor_times((_r2(X, center) * (-1.0 / width ** 2)).exp(), A)

    return SymTensorField(ev, -math.inf, name=f"gauss_theta(w={width})")


def gaussian_theta11(width: float = 1.0) -> SymTensorField:
    """theta_11 = exp(-|x|^2 / w^2), other components 0."""
    A = np.zeros((3, 3))
    A[0, 0] = 1.0
    return gaussian_theta(A, width)


def poly_bump_theta(coeffs, radius: float = 2.0, center=(0.0, 0.0, 0.0)) -> SymTensorField:
    """theta_ij = (A_ij + B_ijk x_k) bump(x) with coeffs (A (3,3), B (3,3,3)), symmetrized in ij."""
    A, B = coeffs
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    B = np.asarray(B, dtype=float)
    B = 0.5 * (B + B.transpose(1, 0, 2))

    def ev(x, k):
        X = J.coordinates(x, k)
        b = bump_jet(X, radius, center)
        lin = J.einsum("k,ijk->ij", J.stack(X, axis=-1), B)
        return (_tensor_times(b, A) + lin * b.expand_dims(-1).expand_dims(-1))

    return SymTensorField(ev, -math.inf, name=f"polybump(r={radius})")


def random_gaussian_theta(rng: np.random.Generator, width: float = 1.0) -> SymTensorField:
    A = rng.normal(size=(3, 3))
    return gaussian_theta(A + A.T, width, rng.normal(size=3) * 0.3)


def random_poly_bump_theta(rng: np.random.Generator, radius: float = 2.0) -> SymTensorField:
    A = rng.normal(size=(3, 3))
    return poly_bump_theta((A + A.T, rng.normal(size=(3, 3, 3)) * 0.5), radius)


def theta_on_sphere(theta: SymTensorField) -> SphereTensor:
    """h = tau^-4 theta as a tensor on S^3 (theta must decay rapidly)."""
    if theta.decay_exponent != -math.inf:
        raise FieldError("only rapidly decaying theta extend smoothly across N")
    return from_north_tensor(push_h(theta), f"h({theta.name})")


# ---------------------------------------------------------------------------
# sphere tensors from ambient polynomials


def ambient_polynomial_tensor(D: np.ndarray, name: str = "ambient") -> SphereTensor:
    """h = restriction of A_ab(p) = sum D_ab..(p..) with D of shape (4, 4) + (4,)*degree."""
    D = np.asarray(D, dtype=float)
    D = 0.5 * (D + np.swapaxes(D, 0, 1))
    degree = D.ndim - 2

    def fn(P):
        A = D.reshape(4, 4, -1)
        if degree == 0:
            return J.einsum(",ab->ab", P[0] * 0.0 + 1.0, D)
        monos = [P[c] for c in range(4)]
        for _ in range(degree - 1):
            monos = [m * P[c] for m in monos for c in range(4)]
        out = J.einsum(",ab->ab", monos[0], A[:, :, 0])
        for i in range(1, len(monos)):
            out = out + J.einsum(",ab->ab", monos[i], A[:, :, i])
        return out

    return sphere_tensor(fn, name)


def random_ambient_tensor(rng: np.random.Generator, degree: int = 2) -> SphereTensor:
    """Generic smooth h: quadratic entries are needed to leave the gauge directions."""
    D = rng.normal(size=(4, 4) + (4,) * degree)
    return ambient_polynomial_tensor(D, f"ambient{degree}")


# ---------------------------------------------------------------------------
# vector fields and gauge directions


def rotation_field(axis: int = 2) -> VectorFieldChart:
    """Infinitesimal rotation about coordinate ``axis`` (a round isometry)."""
    i, j = [a for a in range(3) if a != axis]

    def ev(x, k):
        X = J.coordinates(x, k)
        comps = [X[0] * 0.0 for _ in range(3)]
        comps[i] = -1.0 * X[j]
        comps[j] = X[i] * 1.0
        return J.stack(comps, axis=-1)

    return VectorFieldChart(ev, 1.0, name=f"rot{axis}")


def dilation_field() -> VectorFieldChart:
    """x_i d/dx_i (a conformal Killing field of the round sphere)."""
    return VectorFieldChart(lambda x, k: J.stack(J.coordinates(x, k), axis=-1), 1.0, name="dilation")


def bump_vector_field(v, radius: float = 1.5, center=(0.0, 0.0, 0.0)) -> VectorFieldChart:
    v = np.asarray(v, dtype=float)

    def ev(x, k):
        b = bump_jet(J.coordinates(x, k), radius, center)
        return J.einsum(",i->i", b, v)

    return VectorFieldChart(ev, -math.inf, name="bumpX")


def gaussian_vector_field(v, width: float = 1.0, center=(0.0, 0.0, 0.0)) -> VectorFieldChart:
    v = np.asarray(v, dtype=float)

    def ev(x, k):
        X = J.coordinates(x, k)
        return J.einsum(",i->i", (_r2(X, center) * (-1.0 / width ** 2)).exp(), v)

    return VectorFieldChart(ev, -math.inf, name="gaussX")


def lie_theta(X: VectorFieldChart) -> SymTensorField:
    """theta = tau^4 L_X g for a chart vector field."""
    return lie_derivative_round(X)


def conformal_theta(f: ScalarField) -> SymTensorField:
    """theta = tau^4 (f g) = f delta."""
    return pullback_theta(conformal_direction(f))


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    theta: SymTensorField
    kind: str  # "bump" (non-gauge), "lie", "conformal"
    quadrature: QuadratureConfig = DEFAULT_QUADRATURE
    spectral: bool = True  # theta is L^2 and resolved by the default periodic grid


def gauge_catalog() -> list[CatalogEntry]:
    """theta from L_X g and f g across the vector-field and factor catalog."""
    out = [
        CatalogEntry("lie:rotation", lie_theta(rotation_field(2)), "lie", spectral=False),
        CatalogEntry("lie:dilation", lie_theta(dilation_field()), "lie", spectral=False),
        CatalogEntry("lie:bump", lie_theta(bump_vector_field([1.0, -0.5, 0.25])), "lie",
                     QuadratureConfig.compact(1.5), spectral=False),
        CatalogEntry("lie:gauss", lie_theta(gaussian_vector_field([0.3, 1.0, -0.7], 1.2, (0.2, 0.0, -0.1))), "lie",
                     PANELS),
        CatalogEntry("conf:gauss", conformal_theta(gaussian_scalar(1.0)), "conformal", PANELS),
        CatalogEntry("conf:bump", conformal_theta(bump_scalar(1.5, (0.1, 0.2, 0.0))), "conformal",
                     QuadratureConfig.compact(1.5, (0.1, 0.2, 0.0))),
        CatalogEntry("conf:tau^-2", conformal_theta(tau_power(-2.0)), "conformal"),
    ]
    return out


def bump_catalog(seed: int = 0, count: int = 3) -> list[CatalogEntry]:
    """Non-gauge rapidly decaying theta (Gaussian bumps)."""
    rng = np.random.default_rng(seed)
    out = [CatalogEntry("gauss:theta11", gaussian_theta11(), "bump")]
    for i in range(count - 1):
        out.append(CatalogEntry(f"gauss:random{i}", random_gaussian_theta(rng, 1.0 + 0.25 * i), "bump"))
    return out


# ---------------------------------------------------------------------------
# field-definition files


FIELD_KINDS = ("gaussian_theta", "poly_bump_theta", "ambient", "lie", "conformal")


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def field_from_config(section: configparser.SectionProxy):
    """Construct the field described by one INI section (see README for keys)."""
    kind = section.get("kind", "").strip()
    rng = np.random.default_rng(section.getint("seed", 0))
    if kind == "gaussian_theta":
        A = _floats(section.get("amplitude", "1 0 0 0 0 0"))
        return gaussian_theta(np.array(A), section.getfloat("width", 1.0), _floats(section.get("center", "0 0 0")))
    if kind == "poly_bump_theta":
        return random_poly_bump_theta(rng, section.getfloat("radius", 2.0))
    if kind == "ambient":
        return random_ambient_tensor(rng, section.getint("degree", 2))
    if kind == "lie":
        which = section.get("vector", "rotation")
        X = {"rotation": lambda: rotation_field(section.getint("axis", 2)),
             "dilation": dilation_field,
             "bump": lambda: bump_vector_field(_floats(section.get("direction", "1 0 0")),
                                               section.getfloat("radius", 1.5))}.get(which)
        if X is None:
            raise FieldError(f"unknown vector field {which!r}")
        return lie_theta(X())
    if kind == "conformal":
        which = section.get("factor", "gaussian")
        f = {"gaussian": lambda: gaussian_scalar(section.getfloat("width", 1.0)),
             "bump": lambda: bump_scalar(section.getfloat("radius", 1.5)),
             "tau_power": lambda: tau_power(section.getfloat("power", -2.0))}.get(which)
        if f is None:
            raise FieldError(f"unknown conformal factor {which!r}")
        return conformal_theta(f())
    raise FieldError(f"unknown field kind {kind!r}; expected one of {FIELD_KINDS}")


def load_field(path: str | Path, section: str = "field"):
    """Read a field-definition file; an optional [grid] section resamples onto a cube grid."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FieldError(f"cannot read field definition {path}")
    if section not in cp:
        raise FieldError(f"{path}: missing [{section}] section")
    field = field_from_config(cp[section])
    if "grid" in cp and isinstance(field, SymTensorField):
        g = cp["grid"]
        grid = GridSpec.cube(g.getfloat("radius", 12.0), g.getint("points", 96))
        field = sample_tensor_on_grid(field, grid)
    return field
