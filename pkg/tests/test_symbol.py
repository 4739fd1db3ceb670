import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paneitzlab import catalog as C
from paneitzlab.fields import FieldError, SymTensorField, pure_trace
from paneitzlab.symbol import (GridTensor, SymbolMatrix, gaussian_transform, householder, null_distance,
                               null_projection, null_symbol_synthesize, parseval_ii, periodic_grid,
                               rotated_symbol_value, spectral_ii_integrand, symbol_integrand, theta_transform,
                               tt_project)
from paneitzlab.variation import II_PREFACTOR, grid_ii_quadform

E1 = np.array([1.0, 0.0, 0.0])
GRID = periodic_grid(8.0, 48)
seeds = st.integers(0, 2**32 - 1)


def random_symbols(r, n):
    A = r.normal(size=(n, 3, 3)) + 1j * r.normal(size=(n, 3, 3))
    return 0.5 * (A + np.swapaxes(A, -1, -2)), r.normal(size=(n, 3)) * r.lognormal(0, 1, size=(n, 1))


def test_hand_values():
    assert symbol_integrand(np.eye(3), E1) == pytest.approx(0.0, abs=1e-15)
    assert -2 + 0.5 + 0.5 * 3 + 0.5 * 3 - 0.5 * 9 + 3 == 0
    assert symbol_integrand(np.diag([0.0, 1.0, -1.0]), E1) == pytest.approx(2.0)
    A = np.zeros((3, 3))
    A[1, 2] = A[2, 1] = 1.0
    assert symbol_integrand(A, E1) == pytest.approx(2.0)
    assert rotated_symbol_value(A, E1) == pytest.approx(2.0)


def test_householder_maps_e1_to_xi(rng):
    xi = rng.normal(size=(50, 3))
    O = householder(xi)
    np.testing.assert_allclose(np.einsum("...ij,...jk->...ik", np.swapaxes(O, -1, -2), O),
                               np.broadcast_to(np.eye(3), O.shape), atol=1e-14)
    np.testing.assert_allclose(O[..., :, 0], xi / np.linalg.norm(xi, axis=-1, keepdims=True), atol=1e-14)
    np.testing.assert_array_equal(householder(np.zeros(3)), np.eye(3))


@given(seeds)
def test_rotation_identity_and_nonnegativity(seed):
    A, xi = random_symbols(np.random.default_rng(seed), 2000)
    a, b = symbol_integrand(A, xi), rotated_symbol_value(A, xi)
    scale = 1 + np.sum(np.abs(A) ** 2, axis=(-1, -2)) * np.sum(xi * xi, -1) ** 2
    assert np.all(np.abs(a - b) <= 1e-12 * scale)
    assert np.all(a >= -1e-12 * scale)


def test_direct_formula_at_e1(rng):
    A, _ = random_symbols(rng, 10)
    B = A
    direct = 0.5 * np.abs(B[:, 1, 1] - B[:, 2, 2]) ** 2 + 2 * np.abs(B[:, 1, 2]) ** 2
    np.testing.assert_allclose(rotated_symbol_value(A, np.broadcast_to(E1, (10, 3))), direct, rtol=1e-14)


@given(seeds)
def test_null_forms(seed):
    r = np.random.default_rng(seed)
    xi = r.normal(size=(200, 3))
    alpha = r.normal(size=200) + 1j * r.normal(size=200)
    beta = r.normal(size=(200, 3)) + 1j * r.normal(size=(200, 3))
    bx = np.einsum("...i,...j->...ij", beta, xi)
    A = alpha[:, None, None] * np.eye(3) + bx + np.swapaxes(bx, -1, -2)
    scale = 1 + np.sum(np.abs(A) ** 2, axis=(-1, -2)) * np.sum(xi * xi, -1) ** 2
    assert np.all(np.abs(symbol_integrand(A, xi)) <= 1e-12 * scale)
    assert np.all(null_distance(A, xi) <= 1e-10 * (1 + np.sqrt(np.sum(np.abs(A) ** 2, axis=(-1, -2)))))


@given(seeds)
def test_zero_integrand_implies_null(seed):
    # the integrand is the squared norm of the complement: projecting away the null part is exact
    r = np.random.default_rng(seed)
    A, xi = random_symbols(r, 100)
    xi = xi / np.linalg.norm(xi, axis=-1, keepdims=True)
    R = A - null_projection(A, xi)
    np.testing.assert_allclose(symbol_integrand(R, xi), symbol_integrand(A, xi), rtol=1e-9, atol=1e-12)
    tiny = null_projection(A, xi) + 1e-5 * R
    assert np.all(symbol_integrand(tiny, xi) <= 1e-8)
    assert np.all(null_distance(tiny, xi) <= 1e-4 * (1 + np.sqrt(np.sum(np.abs(A) ** 2, axis=(-1, -2)))))


def test_symbol_matrix_validation():
    with pytest.raises(FieldError):
        SymbolMatrix(np.zeros((2, 2)), np.zeros(3))


def test_transform_examples():
    sf = theta_transform(SymTensorField.zero(), GRID)
    assert np.all(sf.symbol.A == 0)
    sf = theta_transform(C.gaussian_theta11(), GRID)
    exact = gaussian_transform(sf.symbol.xi, 1.0)
    assert np.max(np.abs(sf.symbol.A[..., 0, 0] - exact)) <= 1e-8
    assert np.max(np.abs(np.delete(sf.symbol.A.reshape(GRID.n + (9,)), 0, axis=-1))) == 0.0
    theta = C.random_gaussian_theta(np.random.default_rng(2))
    A = theta_transform(theta, GRID).symbol.A
    # conjugate symmetry A(-xi) = conj A(xi) (index -k mod n on every axis)
    flipped = np.roll(A[::-1, ::-1, ::-1], 1, axis=(0, 1, 2))
    assert np.max(np.abs(flipped - np.conj(A))) <= 1e-12 * np.max(np.abs(A))


def test_parseval_examples():
    assert parseval_ii(SymTensorField.zero(), GRID) == 0.0
    assert abs(parseval_ii(pure_trace(C.gaussian_scalar(1.0)), GRID)) < 1e-15
    with pytest.raises(FieldError):
        parseval_ii(C.lie_theta(C.dilation_field()), GRID)


def test_spectral_real_space_route_matches_parseval():
    theta = C.random_gaussian_theta(np.random.default_rng(4))
    g = GridTensor(theta(GRID.points()), GRID)
    a = grid_ii_quadform(g)
    b = parseval_ii(g, GRID)
    assert a == pytest.approx(b, rel=1e-10)
    assert spectral_ii_integrand(g).shape == GRID.n
    assert II_PREFACTOR < 0


def test_null_synthesis():
    zero = null_symbol_synthesize(None, None, GRID)
    assert np.all(zero.values == 0)
    alpha = null_symbol_synthesize(lambda k: gaussian_transform(k, 1.5), None, GRID)
    f = np.exp(-np.sum(GRID.points() ** 2, -1) / 1.5 ** 2)
    np.testing.assert_allclose(alpha.values, f[..., None, None] * np.eye(3), atol=1e-10)
    beta = null_symbol_synthesize(None, lambda k: k * gaussian_transform(k, 2.0)[..., None], GRID)
    ref = abs(parseval_ii(C.gaussian_theta11(), GRID))  # a non-null bump of comparable size
    for t in (alpha, beta):
        assert abs(parseval_ii(t, GRID)) <= 1e-10 * ref
    with pytest.raises(FieldError):
        null_symbol_synthesize(None, lambda k: 1j * k * gaussian_transform(k)[..., None], GRID)


@settings(max_examples=5)
@given(seeds)
def test_tt_project(seed):
    r = np.random.default_rng(seed)
    raw = r.normal(size=GRID.n + (3, 3)) * np.exp(-np.sum(GRID.points() ** 2, -1) / 4)[..., None, None]
    tt = tt_project(raw, GRID)
    assert np.max(np.abs(np.trace(tt, axis1=-2, axis2=-1))) < 1e-12 * np.max(np.abs(tt))
    np.testing.assert_allclose(tt, np.swapaxes(tt, -1, -2), atol=1e-14)
    np.testing.assert_allclose(tt_project(tt, GRID), tt, atol=1e-12 * np.max(np.abs(tt)))
