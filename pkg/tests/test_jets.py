import math

import numpy as np
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from paneitzlab import jets as J
from paneitzlab.jets import Jet

xs = sp.symbols("x0:3")
points = st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3).map(np.array)


def sympy_partials(expr, x, order):
    """Oracle: all partials up to ``order`` in the jet's monomial order."""
    sub = dict(zip(xs, x))
    out = []
    for alpha in J.monomials(order):
        d = expr
        for a, k in enumerate(alpha):
            if k:
                d = sp.diff(d, xs[a], k)
        out.append(float(d.subs(sub)))
    return np.array(out)


def jet_partials(jet, order):
    return np.array([jet.partial(a) for a in J.monomials(order)])


def test_monomial_count():
    assert J.n_monomials(4) == 35
    assert len(J.monomials(4)) == 35


@settings(max_examples=8)
@given(points)
def test_product_and_quotient_match_symbolic(x):
    X = J.coordinates(x, 4)
    jet = (X[0] * X[0] * X[1] + 1.0) / (X[2] * X[2] + 2.0)
    expr = (xs[0] ** 2 * xs[1] + 1) / (xs[2] ** 2 + 2)
    np.testing.assert_allclose(jet_partials(jet, 4), sympy_partials(expr, x, 4), rtol=1e-11, atol=1e-11)


@settings(max_examples=8)
@given(points)
def test_elementary_functions_match_symbolic(x):
    X = J.coordinates(x, 4)
    r2 = X[0] * X[0] + X[1] * X[1] + X[2] * X[2] + 1.0
    jet = r2.sqrt() * (X[0] * -0.5).exp() + (X[1] * 0.7).sin() * r2.log() + r2 ** -1.5
    r2s = xs[0] ** 2 + xs[1] ** 2 + xs[2] ** 2 + 1
    expr = sp.sqrt(r2s) * sp.exp(-xs[0] / 2) + sp.sin(sp.Rational(7, 10) * xs[1]) * sp.log(r2s) + r2s ** sp.Rational(-3, 2)
    np.testing.assert_allclose(jet_partials(jet, 4), sympy_partials(expr, x, 4), rtol=1e-10, atol=1e-10)


def test_derivative_lowers_order():
    X = J.coordinates(np.array([0.3, -0.2, 0.5]), 3)
    f = X[0] * X[0] * X[1]
    d = f.d(0)
    assert d.order == 2
    assert math.isclose(d.value, 2 * 0.3 * -0.2)
    assert math.isclose(d.partial((1, 1, 0)), 2.0)


@given(st.integers(0, 2**32 - 1))
def test_inverse_and_cholesky(seed):
    r = np.random.default_rng(seed)
    x = r.normal(size=(4, 3)) * 0.5
    X = J.coordinates(x, 2)
    B = r.normal(size=(3, 3))
    base = B @ B.T + 3 * np.eye(3)
    S = r.normal(size=(3, 3, 3))
    entries = [[base[i, j] + sum((S[i, j, k] + S[j, i, k]) * X[k] for k in range(3)) * X[i] * 0.1
                for j in range(3)] for i in range(3)]
    for i in range(3):
        for j in range(i):
            entries[i][j] = entries[j][i]
    m = J.stack([J.stack(row, axis=-1) for row in entries], axis=-2)
    inv = J.inverse(m)
    eye = J.einsum("ij,jk->ik", m, inv)
    np.testing.assert_allclose(eye.c[..., 0], np.broadcast_to(np.eye(3), (4, 3, 3)), atol=1e-12)
    np.testing.assert_allclose(eye.c[..., 1:], 0.0, atol=1e-11)
    L = J.cholesky(m)
    back = J.einsum("ik,jk->ij", L, L)
    np.testing.assert_allclose(back.c, m.c, atol=1e-11)
    assert np.all(np.triu(L.value, 1) == 0)


def test_compose_chain_rule():
    x = np.array([[0.2, 0.1, -0.4]])
    X = J.coordinates(x, 3)
    inner = [X[0] + X[1], X[1] * X[2], X[2] * 2.0]
    Y = J.coordinates(np.stack([v.value for v in inner], -1), 3)
    outer = Y[0] * Y[1] + Y[2] * Y[2] * Y[0]
    direct = (X[0] + X[1]) * (X[1] * X[2]) + (X[2] * 2.0) * (X[2] * 2.0) * (X[0] + X[1])
    np.testing.assert_allclose(J.compose(outer, inner).c, direct.c, atol=1e-12)


def test_constant_jet():
    c = Jet.constant(np.array([2.0, 3.0]), 2)
    assert c.shape == (2,)
    np.testing.assert_array_equal(c.value, [2.0, 3.0])
    assert np.all(c.c[..., 1:] == 0)
