import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from paneitzlab import catalog as C
from paneitzlab import sphere as S
from paneitzlab import variation as V
from paneitzlab.charts import sphere_scalar, to_sphere
from paneitzlab.curvature import MetricField, paneitz_apply_exact
from paneitzlab.fields import FieldError

NORTH = np.array([0.0, 0.0, 0.0, 1.0])


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# spectrum


def test_sigma_examples():
    assert S.sigma(0) == -15 / 16
    assert S.sigma(1) == 105 / 16
    assert S.sigma(0) == S.LAMBDA_1 and S.sigma(1) == S.LAMBDA_2
    assert np.all(np.diff(S.sigma(np.arange(20))) > 0)
    assert S.multiplicity(3) == 16


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_sigma_matches_curvature_paneitz_on_zonal(k, rng):
    # oracle: the operator built from the round metric curvature, applied in the chart
    axis = unit(rng.normal(size=4))
    z = S.SphereExpansion.zonal(k, axis).as_sphere_scalar()
    x = rng.normal(size=(6, 3))
    lhs = paneitz_apply_exact(MetricField.round(), z.north, x)
    rhs = S.sigma(k) * z.north(x)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, abs(S.sigma(k)))


def test_paneitz_sphere_examples():
    one = S.SphereExpansion.constant(1.0)
    q = to_sphere(np.array([[0.3, -0.1, 0.2]]))
    assert S.paneitz_sphere(one)(q)[0] == pytest.approx(-15 / 16, rel=1e-14)
    z1 = S.SphereExpansion.zonal(1, NORTH)
    assert S.paneitz_sphere(z1)(q)[0] == pytest.approx(105 / 16 * z1(q)[0], rel=1e-14)
    zero = S.SphereExpansion.constant(0.0)
    assert S.paneitz_sphere(zero)(q)[0] == 0.0


def test_zonal_normalization_and_gram(rng):
    # oracle: two-chart quadrature of products of zonal harmonics
    a, b = unit(rng.normal(size=4)), unit(rng.normal(size=4))
    for k in (1, 2):
        za = S.SphereExpansion.zonal(k, a).as_sphere_scalar()
        zb = S.SphereExpansion.zonal(k, b).as_sphere_scalar()
        quad = S.s3_integral(lambda x, c: za.chart(c)(x) * zb.chart(c)(x))
        assert quad == pytest.approx(S.zonal_gram(k, a[None], b[None])[0, 0], abs=1e-10)
        assert S.inner(S.SphereExpansion.zonal(k, a), S.SphereExpansion.zonal(k, a)) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Green's function


def test_green_values():
    assert float(S.green_ambient(NORTH, NORTH)) == 0.0
    assert float(S.green_north_eval(np.zeros((1, 3)))[0]) == pytest.approx(-1 / (4 * math.pi), abs=1e-16)
    x = np.array([[0.2, 0.5, -1.0]])
    assert S.green_eval(x, x)[0] == 0.0


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_green_symmetry_and_chart_agreement(v):
    a, b = np.array(v[:3]), np.array(v[3:])
    assert S.green_eval(a, b) == pytest.approx(S.green_eval(b, a), abs=1e-15)
    amb = S.green_ambient(to_sphere(a), to_sphere(b))
    assert S.green_eval(a, b) == pytest.approx(amb, abs=1e-14)


def test_green_spectral_sum_matches_closed_form(rng):
    p, q = to_sphere(rng.normal(size=(4, 3))), to_sphere(rng.normal(size=(4, 3)))
    assert np.max(np.abs(S.green_spectral(p, q, 2000) - S.green_ambient(p, q))) < 1e-6


def test_green_l2_norm():
    # int |p - q|^2 dmu(q) = 2 vol, so the norm is sqrt(2 * 2 pi^2) / 8 pi = 1/4
    assert S.green_l2_norm() == pytest.approx(0.25, abs=1e-8)
    assert S.green_l2_norm(pole=unit([1.0, 2.0, -0.5, 0.3])) == pytest.approx(0.25, abs=1e-8)


def test_green_reproducing():
    phi = sphere_scalar(lambda P: (P[0] * 0.5 + P[3] * P[3] - 0.25 * P[1] * P[2]).exp(), "phi")
    assert S.green_reproducing_residual(phi) <= 1e-8


def test_green_tail_consistency():
    # G(p, p) = 0 so the truncated diagonal sum equals minus the tail energy
    for L in (2, 10, 30):
        assert S.green_diagonal_partial(L) + S.GreenTail(NORTH, L).energy == pytest.approx(0.0, abs=1e-12)


def test_moebius_covariance(rng):
    for _ in range(5):
        F = S.random_moebius(rng)
        a, b = rng.normal(size=(20, 3)), rng.normal(size=(20, 3))
        assert S.moebius_covariance_residual(F, a, b) <= 1e-8


# ---------------------------------------------------------------------------
# energy and I_4


def test_energy_examples():
    one = S.SphereExpansion.constant(1.0)
    assert S.energy(one) == pytest.approx(-15 * math.pi ** 2 / 8, rel=1e-14)
    z1 = S.SphereExpansion.zonal(1, NORTH)
    assert S.energy(z1) == pytest.approx(105 / 16, rel=1e-14)
    # quadrature of the integral form against the spectral route
    assert S.energy(one.as_sphere_scalar(), one.as_sphere_scalar()) == pytest.approx(-15 * math.pi ** 2 / 8,
                                                                                    rel=1e-9)
    assert S.energy(z1.as_sphere_scalar(), z1.as_sphere_scalar()) == pytest.approx(105 / 16, rel=1e-9)


def test_energy_symmetric(rng):
    u = S.SphereExpansion.zonal(2, unit(rng.normal(size=4))) + S.SphereExpansion.constant(0.3)
    v = S.SphereExpansion.zonal(1, unit(rng.normal(size=4)))
    us, vs = u.as_sphere_scalar(), v.as_sphere_scalar()
    assert S.energy(us, vs) == pytest.approx(S.energy(vs, us), rel=1e-10)
    assert S.energy(us, vs) == pytest.approx(S.energy(u, v), abs=1e-9)


def test_i4_examples():
    one = S.SphereExpansion.constant(1.0)
    expected = -15 * math.pi ** 2 / 8 * (2 * math.pi ** 2) ** (1 / 3)
    assert S.i4_evaluate(one) == pytest.approx(expected, rel=1e-10)
    # scale invariance
    assert S.i4_evaluate(3.0 * one) == pytest.approx(expected, rel=1e-10)
    u = S.SphereExpansion.constant(1.0) + 0.1 * S.SphereExpansion.zonal(1, NORTH)
    assert S.i4_evaluate(u) == pytest.approx(S.i4_evaluate(u.as_sphere_scalar()), rel=1e-8)


def test_i4_rejects_sign_change():
    with pytest.raises(FieldError):
        S.i4_evaluate(S.SphereExpansion.zonal(1, NORTH))


# ---------------------------------------------------------------------------
# nu_p


def test_nu_north():
    sol = S.nu_solve("N", 30)
    assert abs(sol.nu) <= 1e-3
    assert sol.green_correlation >= 0.999
    assert abs(sol.alpha - 4.0) <= 1e-2
    assert sol.constraint_residual <= 1e-10
    assert sol.euler_lagrange_residual <= 1e-10
    assert set(sol.as_dict()) >= {"nu", "alpha", "raw_nu"}


def test_nu_random_poles(rng):
    for _ in range(5):
        p = unit(rng.normal(size=4))
        sol = S.nu_solve(p, 20)
        assert S.LAMBDA_1 <= sol.nu <= S.LAMBDA_2
        assert sol.constraint_residual <= 1e-10


def test_nu_monotone_in_truncation():
    raw = [S._solve_secular(L, False) for L in range(2, 31)]
    assert np.all(np.diff(raw) <= 1e-15)
    enriched = [S._solve_secular(L, True) for L in range(2, 31)]
    assert np.all(np.array(enriched) <= np.array(raw) + 1e-15)


def test_nu_dense_oracle(rng):
    # full harmonic basis, no zonal reduction
    p = unit(rng.normal(size=4))
    for L in (2, 3):
        assert S.nu_dense(p, L) == pytest.approx(S._solve_secular(L, False), abs=1e-9)


def test_nu_unconstrained():
    assert S.nu_unconstrained(30) == pytest.approx(-15 / 16)


def test_nu_errors():
    with pytest.raises(FieldError):
        S.nu_solve("N", 1)


def test_nu_first_variation_vanishes(rng):
    h = C.theta_on_sphere(C.gaussian_theta11())
    r = S.nu_first_variation(h, p=unit(rng.normal(size=4)))
    assert abs(r.value) <= 1e-6 * r.scale
    assert abs(r.volume) <= 1e-6 * r.scale


@pytest.mark.parametrize("name", ["conf:gauss", "lie:gauss"])
def test_nu_second_variation_gauge_null(name):
    e = next(e for e in C.gauge_catalog() if e.name == name)
    r = S.nu_second_variation(e.theta, cfg=e.quadrature)
    nrm = V.l2_norm_squared(e.theta, e.quadrature)
    assert abs(r.value) <= 1e-6 * nrm


def test_nu_second_variation_is_minus_16_ii():
    e = C.bump_catalog(0, 1)[0]
    r = S.nu_second_variation(e.theta, cfg=e.quadrature)
    assert r.value == -16.0 * r.ii
    assert r.ii == pytest.approx(V.ii_quadform(e.theta, e.quadrature))
    assert r.value > 0


def test_nu_second_variation_sphere_tensor_input():
    theta = C.gaussian_theta11()
    r = S.nu_second_variation(C.theta_on_sphere(theta))
    assert r.value == pytest.approx(-16.0 * V.ii_quadform(theta), rel=1e-6)


def test_newton_potential_gaussian():
    # int exp(-|y|^2) / |x - y| dy = pi^(3/2) erf(|x|) / |x|
    N = S.NewtonPotential.from_function(lambda x: np.exp(-np.sum(x * x, -1)), radius=6.0, spacing=0.25)
    x = np.array([[0.3, 0.1, -0.2], [1.0, 0.5, 0.0], [2.5, 0.0, 1.0], [9.0, 1.0, 0.0]])
    r = np.linalg.norm(x, axis=-1)
    exact = math.pi ** 1.5 * erf(r) / r
    assert np.max(np.abs(N(x) - exact) / exact) < 1e-4


def test_nu_solution_roundtrip(tmp_path, rng):
    sol = S.nu_solve([0.3, -1.0, 0.2], 12)
    paths = S.write_nu_solution(sol, tmp_path)
    assert [p.name for p in paths] == [S.NU_TEXT, S.NU_BLOB]
    assert len((tmp_path / S.NU_BLOB).read_bytes()) == 8 * (12 + 2)
    back = S.read_nu_solution(tmp_path)
    q = rng.normal(size=(6, 4))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    assert np.array_equal(back.u(q), sol.u(q))
    assert back.as_dict() == sol.as_dict()


def test_nu_solution_read_errors(tmp_path):
    with pytest.raises(FieldError):
        S.read_nu_solution(tmp_path)
    sol = S.nu_solve("N", 4)
    S.write_nu_solution(sol, tmp_path)
    (tmp_path / S.NU_BLOB).write_bytes(b"\0" * 8)
    with pytest.raises(FieldError):
        S.read_nu_solution(tmp_path)
