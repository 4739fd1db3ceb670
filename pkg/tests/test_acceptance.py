"""Acceptance criteria at their stated tolerances; one PASS/FAIL line per criterion.

The lines are printed as each test runs (visible with -s) and again in the
terminal summary (see conftest.py).
"""

import math
import time

import numpy as np
import pytest

from paneitzlab import catalog as C
from paneitzlab import sphere as S
from paneitzlab import symbol as Y
from paneitzlab import variation as V
from paneitzlab.curvature import MetricField, curvature_pipeline, paneitz_apply_exact
from paneitzlab.expansion import SELECTORS, adjoint_defect_residual, fd_validate
from paneitzlab.fields import ScalarField
from paneitzlab.harness.config import SuiteConfig
from paneitzlab.harness.report import emit_report
from paneitzlab.harness.suites import (adjoint_triples, expansion_perturbations, first_variation_catalog,
                                       random_poles, random_symmetric, run_suite)

RESULTS: list[str] = []


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def rng_for(n: int) -> np.random.Generator:
    return np.random.default_rng([2024, n])


def test_criterion_01_round_constants():
    t0 = time.perf_counter()
    x = rng_for(1).uniform(-3.0, 3.0, size=(100, 3))
    g = MetricField.round()
    pack = curvature_pipeline(g, x)
    r_err = float(np.max(np.abs(pack.scalar - 6.0)))
    q_err = float(np.max(np.abs(pack.q_curvature - 15 / 8)))
    p_err = float(np.max(np.abs(paneitz_apply_exact(g, ScalarField.constant(1.0), x) + 15 / 16)))
    dt = time.perf_counter() - t0
    ok = max(r_err, q_err, p_err) <= 1e-8 and dt < 10
    record(1, ok, f"|R-6|={r_err:.2e} |Q-15/8|={q_err:.2e} |P1+15/16|={p_err:.2e} time={dt:.1f}s")


def test_criterion_02_expansion_slopes():
    t0 = time.perf_counter()
    cfg = SuiteConfig()
    rng = rng_for(2)
    perts = expansion_perturbations(cfg, rng)
    x = rng.normal(size=(12, 3)) * 0.6
    phi = C.gaussian_scalar(1.5, (0.2, -0.1, 0.0))
    slopes = []
    for g in (MetricField.euclidean(), MetricField.round()):
        for _, h in perts:
            for sel in SELECTORS:
                slopes.append(fd_validate(sel, g, h, x, phi, cfg.t_grid, (2.7, 3.3)).slope)
    dt = time.perf_counter() - t0
    lo, hi = min(slopes), max(slopes)
    ok = len(slopes) == 2 * 3 * len(SELECTORS) and 2.7 <= lo and hi <= 3.3 and dt < 300
    record(2, ok, f"{len(slopes)} slopes in [{lo:.3f}, {hi:.3f}] time={dt:.0f}s")


def test_criterion_03_first_variation():
    worst_i, worst_nu = 0.0, 0.0
    cat = first_variation_catalog(SuiteConfig(), rng_for(3))
    for _, h in cat:
        r = V.first_variation_pole(V.pullback_theta(h.north))
        worst_i = max(worst_i, abs(r.value) / r.scale)
        nu1 = S.nu_first_variation(h)
        worst_nu = max(worst_nu, abs(nu1.value) / nu1.scale, abs(nu1.volume) / nu1.scale)
    ok = worst_i <= 1e-6 and worst_nu <= 1e-6
    record(3, ok, f"{len(cat)} perturbations: max |I|/|theta|_C4={worst_i:.2e} max |nu1|/scale={worst_nu:.2e}")


@pytest.fixture(scope="module")
def ii_catalog():
    """II, its Parseval counterpart and the L^2 norm for every catalog theta (shared by 4 and 5)."""
    out = []
    for e in C.gauge_catalog() + C.bump_catalog(0, 3):
        r = V.ii_evaluate(e.theta, e.quadrature)
        nrm = V.l2_norm_squared(e.theta, e.quadrature) if e.theta.decay_exponent < -1.5 else 1.0
        p = Y.parseval_ii(e.theta) if e.spectral else None
        out.append((e, r.value, nrm, p))
    return out


def test_criterion_04_second_variation_sign(ii_catalog):
    sign = max(v for _, v, _, _ in ii_catalog)
    gauge = max(abs(v) / n for e, v, n, _ in ii_catalog if e.kind != "bump")
    neg = max(v / n for e, v, n, _ in ii_catalog if e.kind == "bump")
    ok = sign <= 1e-8 and gauge <= 1e-6 and neg < -1e-3
    record(4, ok, f"max II={sign:.2e} gauge max |II|/|theta|^2={gauge:.2e} bump max II/|theta|^2={neg:.3e}")


def test_criterion_05_route_equivalence(ii_catalog):
    gaps = [abs(v - p) / max(abs(v), 1e-10) for _, v, _, p in ii_catalog if p is not None]
    worst = max(gaps)
    record(5, worst <= 1e-6, f"{len(gaps)} spectral entries: max relative gap={worst:.2e}")


def test_criterion_06_symbol_identity():
    t0 = time.perf_counter()
    rng = rng_for(6)
    n = 100_000
    A = random_symmetric(rng, n)
    xi = rng.normal(size=(n, 3)) * np.exp(rng.uniform(-2, 2, size=(n, 1)))
    a = Y.symbol_integrand(A, xi)
    b = Y.rotated_symbol_value(A, xi)
    scale = 1.0 + np.sum(np.abs(A) ** 2, axis=(-2, -1)) * np.sum(xi * xi, -1) ** 2
    worst = float(np.max(np.abs(a - b) / scale))
    negatives = int(np.count_nonzero(a < 0))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and negatives == 0 and dt < 10
    record(6, ok, f"{n} samples: max scaled gap={worst:.2e} negative={negatives} time={dt:.1f}s")


def test_criterion_07_gauge_solver():
    rng = rng_for(7)
    worst = 0.0
    for _ in range(1000):
        H = rng.normal(size=(3, 3, 3))
        H = H + H.transpose(1, 0, 2)
        A = V.gauge_linear_solve(H)
        worst = max(worst, float(np.max(np.abs(A.symmetrized_gradient() - H))) / max(1.0, float(np.max(np.abs(H)))))
    hs = [C.random_ambient_tensor(rng, 2), C.random_ambient_tensor(rng, 1),
          C.theta_on_sphere(C.gaussian_theta11())]
    res, audits = 0.0, []
    for h in hs:
        sol = V.gauge_normalize(h)
        res = max(res, sol.residual)
        audits.append(V.gauge_decay_audit(sol).passed)
    ok = worst <= 1e-12 and res <= 1e-10 and all(audits)
    record(7, ok, f"solve residual={worst:.2e} gauge jet residual={res:.2e} decay audits={audits}")


def test_criterion_08_green_values():
    rng = rng_for(8)
    g_nn = float(S.green_ambient(S.NORTH4, S.NORTH4))
    g_n0 = float(S.green_north_eval(np.zeros((1, 3)))[0])
    l2 = S.green_l2_norm()
    cov = 0.0
    for _ in range(10):
        F = S.random_moebius(rng)
        cov = max(cov, S.moebius_covariance_residual(F, rng.normal(size=(10, 3)), rng.normal(size=(10, 3))))
    ok = g_nn == 0.0 and g_n0 == -1 / (4 * math.pi) and abs(l2 - 0.25) <= 1e-8 and cov <= 1e-8
    record(8, ok, f"G_N(N)={g_nn} G_N(0)+1/4pi={g_n0 + 1 / (4 * math.pi):.1e} |G_N|_2={l2:.12f} "
                  f"moebius={cov:.2e}")


def test_criterion_09_nu_solver():
    t0 = time.perf_counter()
    sol = S.nu_solve("N", 30)
    lo, hi = math.inf, -math.inf
    for p in random_poles(rng_for(9), 10):
        nu = S.nu_solve(p, 30).nu
        lo, hi = min(lo, nu), max(hi, nu)
    dt = time.perf_counter() - t0
    ok = (abs(sol.nu) <= 1e-3 and sol.green_correlation >= 0.999 and abs(sol.alpha - 4) <= 1e-2
          and S.sigma(0) == -15 / 16 and S.sigma(1) == 105 / 16 and S.LAMBDA_1 <= lo and hi <= S.LAMBDA_2
          and dt < 120)
    record(9, ok, f"nu_N={sol.nu:.2e} corr={sol.green_correlation:.6f} alpha={sol.alpha:.6f} "
                  f"random poles in [{lo:.3g}, {hi:.3g}] time={dt:.1f}s")


def test_criterion_10_nu_second_variation():
    worst = 0.0
    entries = C.bump_catalog(0, 3)
    for e in entries:
        r = S.nu_second_variation(e.theta, assemble=True, cfg=e.quadrature)
        worst = max(worst, abs(r.assembly + 16 * r.ii) / abs(r.ii))
    record(10, worst <= 1e-2, f"{len(entries)} perturbations: max |nu2 + 16 II|/|II|={worst:.2e}")


def test_criterion_11_adjoint_defect():
    g = MetricField.round()
    vals = [adjoint_defect_residual(g, h, a, b, rule) for h, a, b, rule in adjoint_triples(rng_for(11), 10)]
    worst = max(abs(v) for v in vals)
    record(11, worst <= 1e-8 and len(vals) == 10, f"10 triples: max residual={worst:.2e}")


def test_criterion_12_determinism(tmp_path):
    cfg = SuiteConfig(catalog="minimal", assemble=False, seed=7)
    blobs = []
    for run in ("a", "b"):
        out = tmp_path / run
        paths = emit_report(run_suite(cfg, "all"), out)
        blobs.append({p.name: p.read_bytes() for p in paths})
    same = blobs[0] == blobs[1]
    record(12, same, f"{len(blobs[0])} report files byte-identical across two runs: {same}")
