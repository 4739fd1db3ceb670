import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paneitzlab import catalog as C
from paneitzlab import variation as V
from paneitzlab.charts import round_metric_tensor
from paneitzlab.fields import FieldError, SymTensorField, pure_trace
from paneitzlab.symbol import parseval_ii, periodic_grid

# small cube, still spectrally accurate for unit-width Gaussians
CUBE = V.QuadratureConfig(cube_radius=8.0, cube_points=64, method="cube")
GRID = periodic_grid(8.0, 64)
SMALL = V.QuadratureConfig(cube_radius=6.0, cube_points=48, method="cube")
seeds = st.integers(0, 2**32 - 1)


def test_ii_zero_and_conformal():
    assert V.ii_quadform(SymTensorField.zero(), CUBE) == 0.0
    theta = pure_trace(C.gaussian_scalar(1.0, (0.1, 0.0, -0.2)))
    assert abs(V.ii_quadform(theta, CUBE)) < 1e-12


def test_ii_gaussian_negative_and_matches_fourier_route():
    theta = C.gaussian_theta11()
    real = V.ii_quadform(theta, CUBE)
    fourier = parseval_ii(theta, GRID)
    assert real < 0
    assert abs(real - fourier) <= 1e-6 * abs(fourier)
    assert real / V.l2_norm_squared(theta, CUBE) < -1e-3


def test_ii_rejects_slow_decay():
    with pytest.raises(FieldError):
        V.ii_quadform(C.lie_theta(C.rotation_field()).with_name("x") * C.tau_power(2.0))


@settings(max_examples=3)
@given(seeds)
def test_bilinear_symmetry_and_polarization(seed):
    r = np.random.default_rng(seed)
    a, b = C.random_gaussian_theta(r), C.random_gaussian_theta(r, 1.2)
    ab = V.ii_bilinear(a, b, SMALL)
    assert ab == pytest.approx(V.ii_bilinear(b, a, SMALL), rel=1e-12, abs=1e-15)
    pol = 0.25 * (V.ii_quadform(a + b, SMALL) - V.ii_quadform(a - b, SMALL))
    assert ab == pytest.approx(pol, rel=1e-9, abs=1e-13)
    assert V.ii_bilinear(a, a, SMALL) == pytest.approx(V.ii_quadform(a, SMALL), rel=1e-12)


def test_gauge_directions_are_null():
    theta = C.gaussian_theta11()
    norm = math.sqrt(V.l2_norm_squared(theta, CUBE))
    for entry in C.gauge_catalog():
        if entry.name in ("lie:gauss", "conf:gauss"):
            kappa = entry.theta
            assert abs(V.ii_quadform(kappa, entry.quadrature)) < 1e-10
            panels = entry.quadrature
            assert abs(V.ii_bilinear(theta, kappa, panels)) < 1e-6 * norm


def test_flux_examples():
    assert V.first_variation_pole(C.random_poly_bump_theta(np.random.default_rng(0), 1.5)).value == 0.0
    eye = SymTensorField.from_expression(lambda X: C._tensor_times(X[0] * 0.0 + 1.0, np.eye(3)), 0.0)
    assert V.first_variation_pole(eye).value == 0.0
    # h = f g with f a Gaussian: flux decays and extrapolates to 0
    theta = pure_trace(C.gaussian_scalar(1.0))
    res = V.first_variation_pole(theta)
    assert abs(res.value) <= 1e-6 * res.scale


def test_flux_of_slowly_decaying_theta(rng):
    sol = V.gauge_normalize(C.random_ambient_tensor(rng, 2))
    res = V.first_variation_pole(sol.theta)
    assert abs(res.value) <= 1e-6 * res.scale
    assert abs(res.fluxes[-1]) < abs(res.fluxes[0]) or abs(res.fluxes[0]) < 1e-12


def test_flux_matches_volume_integral():
    theta = C.random_gaussian_theta(np.random.default_rng(3))
    R = 3.0
    flux = V.boundary_flux(theta, R, 32)
    vol = V.FLUX_PREFACTOR * V.laplacian_s_ball(theta, R, 48, 32)
    assert flux == pytest.approx(vol, rel=1e-8, abs=1e-14)


def test_offdiagonal_zero_h():
    h = C.theta_on_sphere(SymTensorField.zero())
    assert V.i_offdiagonal(h, [0.3, 0.1, 0.0], green_constant=0.0).value == 0.0


@pytest.mark.parametrize("y, nodes", [((0.4, -0.2, 0.3), (48, 32)), ((3.0, 0.9, -0.6), (64, 48))])
def test_offdiagonal_two_routes(y, nodes):
    theta = C.random_poly_bump_theta(np.random.default_rng(5), 1.5)
    support = ((0.0, 0.0, 0.0), 1.5)
    a = V.offdiagonal_first_term(theta, y, "polar", support, n_r=nodes[0], n_theta=nodes[1])
    b = V.offdiagonal_first_term(theta, y, "multipole", support, n_r=nodes[0], n_theta=nodes[1], lmax=48)
    assert abs(a - b) <= 1e-6 * abs(b)


def test_offdiagonal_limit_at_pole():
    theta = C.random_poly_bump_theta(np.random.default_rng(5), 1.5)
    h = C.theta_on_sphere(theta)
    c = V.green_weighted_constant(h)
    support = ((0.0, 0.0, 0.0), 1.5)
    vals = [abs(V.i_offdiagonal(h, np.array([1.0, 0.3, -0.2]) * r, "polar", green_constant=c,
                                support=support, n_r=32, n_theta=24).value) for r in (4.0, 64.0, 1024.0)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-2 * vals[0]


def test_offdiagonal_route_errors():
    theta = C.gaussian_theta11()
    with pytest.raises(FieldError):
        V.offdiagonal_first_term(theta, [0.0, 0.0, 0.1], "multipole")
    with pytest.raises(FieldError):
        V.offdiagonal_first_term(theta, [0.0, 0.0, 0.1], "nope")


def test_gauge_linear_solve_examples():
    assert np.all(V.gauge_linear_solve(np.zeros((3, 3, 3))).coeffs == 0)
    H = np.zeros((3, 3, 3))
    for i in range(3):
        H[i, i, 0] = 1.0  # H_ij = delta_ij y_1
    A = V.gauge_linear_solve(H)
    np.testing.assert_allclose(A.symmetrized_gradient(), H, atol=1e-14)
    with pytest.raises(FieldError):
        V.gauge_linear_solve(np.random.default_rng(0).normal(size=(3, 3, 3)))


@given(seeds)
def test_gauge_linear_solve_residual(seed):
    H = np.random.default_rng(seed).normal(size=(3, 3, 3))
    H = H + H.transpose(1, 0, 2)
    A = V.gauge_linear_solve(H)
    assert np.max(np.abs(A.symmetrized_gradient() - H)) <= 1e-12 * max(1.0, np.max(np.abs(H)))


def test_gauge_normalize_flat_at_pole():
    sol = V.gauge_normalize(C.theta_on_sphere(C.gaussian_theta11()))
    assert np.all(sol.alpha1 == 0) and np.all(sol.alpha2.coeffs == 0)
    assert sol.residual == 0.0


def test_gauge_normalize_metric():
    sol = V.gauge_normalize(round_metric_tensor())
    # g(0) = tau(0)^-4 delta = 4 delta in the south chart
    np.testing.assert_allclose(sol.alpha1, 0.5 * 4 * np.eye(3), atol=1e-14)
    assert sol.residual <= 1e-10


@settings(max_examples=4)
@given(seeds)
def test_gauge_normalize_random(seed):
    sol = V.gauge_normalize(C.random_ambient_tensor(np.random.default_rng(seed), 2))
    assert sol.residual <= 1e-10
    assert V.gauge_decay_audit(sol).passed


def test_tt_orthogonality():
    from paneitzlab.symbol import GridTensor, gaussian_transform, null_symbol_synthesize

    grid = periodic_grid(8.0, 48)
    zero = GridTensor(np.zeros(grid.n + (3, 3)), grid)
    theta = null_symbol_synthesize(lambda k: gaussian_transform(k, 1.5),
                                   lambda k: k * gaussian_transform(k, 2.0)[..., None], grid)
    assert V.tt_orthogonality_residual(theta, zero) == 0.0
    kappa = V.random_tt_kappa(grid, np.random.default_rng(1))
    w = V.tau_grid(grid) ** -6
    norm = math.sqrt(np.sum(np.sum(theta.values ** 2, (-1, -2)) * w) * np.sum(np.sum(kappa.values ** 2, (-1, -2)) * w)) * grid.cell_volume
    assert abs(V.tt_orthogonality_residual(theta, kappa)) <= 1e-6 * norm
    small = GridTensor(kappa.values * 1e-3, grid)
    assert V.tt_orthogonality_residual(theta, small) == pytest.approx(1e-3 * V.tt_orthogonality_residual(theta, kappa))
    with pytest.raises(FieldError):
        V.tt_orthogonality_residual(theta, GridTensor(theta.values, grid))
