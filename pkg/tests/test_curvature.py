import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from paneitzlab import catalog as C
from paneitzlab import jets as J
from paneitzlab.curvature import (MetricError, MetricField, bianchi_residual, conformal_covariance_residual,
                                  curvature_pipeline, laplace_beltrami, paneitz_apply_exact)
from paneitzlab.fields import ScalarField, SymTensorField, tau

xs = sp.symbols("x0:3")
r2s = xs[0] ** 2 + xs[1] ** 2 + xs[2] ** 2


def sym_metric(expr_matrix):
    """SymTensorField from a sympy matrix, with jets from sympy-generated numpy code."""
    return SymTensorField.from_components(
        [sym_scalar(expr_matrix[i, j]) for i, j in C.UPPER])


def sym_scalar(expr):
    """ScalarField whose jets come from exact symbolic partials (oracle-grade input)."""
    cache = {}

    def ev(x, k):
        if k not in cache:
            cache[k] = [sp.lambdify(xs, sp.diff(expr, *[v for a, v in enumerate(xs) for _ in range(m[a])])
                                    if sum(m) else expr, "numpy") for m in J.monomials(k)]
        fns = cache[k]
        w = [float(np.prod([math.factorial(a) for a in m])) for m in J.monomials(k)]
        c = np.stack([np.broadcast_to(np.asarray(f(x[..., 0], x[..., 1], x[..., 2]), float), x.shape[:-1]) / wi
                      for f, wi in zip(fns, w)], axis=-1)
        return J.Jet(c, k)

    return ScalarField(ev)


def christoffel_riemann_oracle(G, x):
    """Gamma^k_ij and R^l_ijk from exact first and second partials of g at one point."""
    sub = dict(zip(xs, x))
    g = np.array(G.subs(sub), dtype=float)
    dg = np.array([[[float(sp.diff(G[i, j], xs[m]).subs(sub)) for m in range(3)] for j in range(3)]
                   for i in range(3)])  # [i, j, m]
    ddg = np.array([[[[float(sp.diff(G[i, j], xs[m], xs[n]).subs(sub)) for n in range(3)] for m in range(3)]
                     for j in range(3)] for i in range(3)])
    gi = np.linalg.inv(g)
    low = 0.5 * (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg) - np.einsum("ijl->lij", dg))
    gam = np.einsum("kl,lij->kij", gi, low)
    dlow = 0.5 * (np.einsum("jlim->lijm", ddg) + np.einsum("iljm->lijm", ddg) - np.einsum("ijlm->lijm", ddg))
    dgi = -np.einsum("ka,abm,bl->klm", gi, dg, gi)
    dgam = np.einsum("klm,lij->kijm", dgi, low) + np.einsum("kl,lijm->kijm", gi, dlow)
    riem = (np.einsum("ljki->lijk", dgam) - np.einsum("likj->lijk", dgam)
            + np.einsum("lim,mjk->lijk", gam, gam) - np.einsum("ljm,mik->lijk", gam, gam))
    return gam, riem, gi


def test_christoffel_and_riemann_match_symbolic_oracle():
    S = sp.Matrix([[1, 0.3, -0.2], [0.3, 0.5, 0.1], [-0.2, 0.1, 0.8]])
    G = sp.eye(3) + sp.Rational(3, 10) * sp.exp(-r2s / 2) * S + sp.Rational(1, 10) * sp.Matrix(
        3, 3, lambda i, j: xs[i] * xs[j])
    g = MetricField(sym_metric(G))
    x = np.array([0.3, -0.5, 0.2])
    pack = curvature_pipeline(g, x)
    gam, riem, gi = christoffel_riemann_oracle(G, x)
    np.testing.assert_allclose(pack.christoffel, gam, atol=1e-12)
    np.testing.assert_allclose(pack.riemann, riem, atol=1e-11)
    ric = np.einsum("iijk->jk", riem)
    np.testing.assert_allclose(pack.ricci, ric, atol=1e-11)
    assert pack.scalar == pytest.approx(np.einsum("ij,ij->", gi, ric), abs=1e-11)
    assert pack.ricci_norm2 == pytest.approx(np.einsum("ia,jb,ij,ab->", gi, gi, ric, ric), abs=1e-11)


def conformally_flat_oracle(u, x):
    """R, |Rc|^2, Q of e^{2u} delta from closed-form conformal change formulas (n = 3)."""
    grad = [sp.diff(u, v) for v in xs]
    lap0 = lambda f: sum(sp.diff(f, v, 2) for v in xs)
    gu2 = sum(a * a for a in grad)
    R = -sp.exp(-2 * u) * (4 * lap0(u) + 2 * gu2)
    Rc = sp.Matrix(3, 3, lambda i, j: -(sp.diff(u, xs[i], xs[j]) - grad[i] * grad[j])
                   - (lap0(u) + gu2) * (1 if i == j else 0))
    rc2 = sp.exp(-4 * u) * sum(Rc[i, j] ** 2 for i in range(3) for j in range(3))
    lapR = sp.exp(-2 * u) * (lap0(R) + sum(a * sp.diff(R, v) for a, v in zip(grad, xs)))
    Q = -lapR / 4 - 2 * rc2 + sp.Rational(23, 32) * R ** 2
    sub = dict(zip(xs, x))
    return float(R.subs(sub)), float(rc2.subs(sub)), float(Q.subs(sub))


@pytest.mark.parametrize("weighted", [False, True])
def test_q_curvature_conformally_flat_oracle(weighted):
    u = sp.Rational(1, 5) * xs[0] * xs[1] + sp.Rational(1, 10) * sp.sin(xs[2]) + sp.Rational(1, 20) * r2s
    w = sym_scalar(sp.exp(2 * u))
    h = SymTensorField.from_expression(lambda X: J.einsum(",ij->ij", w.jet(
        np.stack([v.value for v in X], -1), X[0].order), np.eye(3)))
    g = MetricField(h, weight=w if weighted else None)
    x = np.array([0.4, -0.3, 0.6])
    R, rc2, Q = conformally_flat_oracle(u, x)
    pack = curvature_pipeline(g, x)
    assert pack.scalar == pytest.approx(R, abs=1e-11)
    assert pack.ricci_norm2 == pytest.approx(rc2, abs=1e-11)
    assert pack.q_curvature == pytest.approx(Q, abs=1e-10)


def test_flat_metric_vanishes():
    pack = curvature_pipeline(MetricField.euclidean(), np.random.default_rng(0).normal(size=(4, 3)))
    for arr in (pack.christoffel, pack.riemann, pack.ricci, pack.scalar, pack.q_curvature):
        assert np.all(arr == 0)


@pytest.mark.parametrize("x", [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [-3.0, 0.5, 7.0]])
def test_round_constants(x):
    pack = curvature_pipeline(MetricField.round(), np.array(x))
    assert pack.scalar == pytest.approx(6.0, abs=1e-10)
    assert pack.ricci_norm2 == pytest.approx(12.0, abs=1e-10)
    assert pack.q_curvature == pytest.approx(15 / 8, abs=1e-10)
    assert -2 * 12 + 23 / 32 * 36 == pytest.approx(15 / 8)


def test_round_fast_path_matches_general_path(rng):
    fast = MetricField.round()
    general = MetricField(fast.g)
    x = rng.normal(size=(5, 3))
    a, b = curvature_pipeline(fast, x), curvature_pipeline(general, x)
    np.testing.assert_allclose(a.riemann, b.riemann, atol=1e-12)
    np.testing.assert_allclose(a.q_curvature, b.q_curvature, atol=1e-11)
    phi = C.gaussian_scalar(1.0, (0.2, 0.1, 0.0))
    np.testing.assert_allclose(paneitz_apply_exact(fast, phi, x), paneitz_apply_exact(general, phi, x), atol=1e-11)


def degree_one_harmonic():
    # first ambient coordinate of the inverse stereographic projection
    return ScalarField.from_expression(lambda X: 2.0 * X[0] / (X[0] * X[0] + X[1] * X[1] + X[2] * X[2] + 1.0))


def test_laplace_beltrami_examples(rng):
    x = rng.normal(size=(6, 3))
    r2 = ScalarField.from_expression(lambda X: X[0] * X[0] + X[1] * X[1] + X[2] * X[2])
    np.testing.assert_allclose(laplace_beltrami(MetricField.euclidean(), r2, x), 6.0)
    phi = degree_one_harmonic()
    np.testing.assert_allclose(laplace_beltrami(MetricField.round(), phi, x), -3 * phi(x), atol=1e-12)


def test_paneitz_round_examples(rng):
    x = rng.normal(size=(10, 3)) * 2
    g = MetricField.round()
    np.testing.assert_allclose(paneitz_apply_exact(g, ScalarField.constant(1.0), x), -15 / 16, atol=1e-10)
    phi = degree_one_harmonic()
    assert 9 - 3 / 2 - 15 / 16 == pytest.approx(105 / 16)
    np.testing.assert_allclose(paneitz_apply_exact(g, phi, x), 105 / 16 * phi(x), atol=1e-10)


def test_paneitz_flat_is_bilaplacian():
    expr = sp.exp(-r2s) * (1 + xs[0])
    bilap = sum(sp.diff(expr, a, a, b, b) for a in xs for b in xs)
    x = np.array([0.3, 0.7, -0.1])
    val = paneitz_apply_exact(MetricField.euclidean(), sym_scalar(expr), x)
    assert val == pytest.approx(float(bilap.subs(dict(zip(xs, x)))), abs=1e-11)


def test_paneitz_conformally_flat_oracle():
    # P_{rho^-4 delta} phi = rho^7 Lap^2 (rho phi) with the flat bilaplacian done symbolically
    rho = 1 + sp.Rational(1, 5) * sp.exp(-r2s) + sp.Rational(1, 10) * xs[0] * xs[1] / (1 + r2s)
    phi = sp.cos(xs[0]) * sp.exp(-r2s / 3)
    target = rho ** 7 * sum(sp.diff(rho * phi, a, a, b, b) for a in xs for b in xs)
    g = MetricField.euclidean().conformal(sym_scalar(rho))
    x = np.array([0.2, -0.4, 0.5])
    assert paneitz_apply_exact(g, sym_scalar(phi), x) == pytest.approx(
        float(target.subs(dict(zip(xs, x)))), rel=1e-10, abs=1e-10)


def test_conformal_covariance_examples(rng):
    x = rng.uniform(-2, 2, size=(20, 3))
    phi = C.gaussian_scalar(1.2, (0.3, 0.0, -0.2))
    g = MetricField.round()
    assert conformal_covariance_residual(g, ScalarField.constant(1.0), phi, x) == 0.0
    # flat -> round via rho = tau
    assert conformal_covariance_residual(MetricField.euclidean(), tau(), phi, x) < 1e-9


@settings(max_examples=8)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_conformal_covariance_random_factor(seed, on_round):
    r = np.random.default_rng(seed)
    rho = 1.0 + 0.1 * C.bump_scalar(1.5, r.uniform(-0.5, 0.5, 3))
    phi = C.gaussian_scalar(1.0, r.uniform(-0.5, 0.5, 3))
    g = MetricField.round() if on_round else MetricField.euclidean()
    x = r.uniform(-1.5, 1.5, size=(8, 3))
    assert conformal_covariance_residual(g, rho, phi, x) < 1e-9


def test_bianchi_identity(rng):
    h = C.random_gaussian_theta(rng)
    g = MetricField.round().perturbed(h, 0.2)
    assert bianchi_residual(g, rng.normal(size=(6, 3))) < 1e-10


def test_indefinite_metric_fails_loudly():
    g = MetricField.euclidean().perturbed(C.gaussian_theta(-np.eye(3) * 4), 1.0)
    with pytest.raises(MetricError):
        curvature_pipeline(g, np.zeros(3))
