"""Verification suites: each turns module results into report entries."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .. import catalog as C
from .. import sphere as S
from .. import symbol as Y
from .. import variation as V
from ..charts import to_sphere
from ..curvature import MetricField, bianchi_residual, conformal_covariance_residual, curvature_pipeline, \
    paneitz_apply_exact
from ..expansion import SELECTORS, adjoint_defect_residual, fd_validate, p1_one, p2_one, q_expansion
from ..fields import ScalarField, SymTensorField
from ..quadrature import hermite_rule
from .config import SuiteConfig
from .report import Report, ReportEntry, failed_entry

SUITES = ("expansion-validate", "first-variation", "second-variation", "symbol-check", "nu-solve", "covariance")

# anchors each suite can emit; the union must cover the registry
SUITE_ANCHORS: dict[str, tuple[str, ...]] = {
    "covariance": ("round-curvature", "paneitz-operator", "conformal-covariance", "green-covariance",
                   "green-closed-form"),
    "expansion-validate": ("expansion-coefficients", "adjoint-defect", "paneitz-operator"),
    "first-variation": ("first-variation-pole", "first-variation-offdiagonal", "nu-first-variation"),
    "second-variation": ("second-variation-pole", "second-variation-bilinear", "gauge-null",
                         "gauge-linear-system", "gauge-normalization", "nu-second-variation"),
    "symbol-check": ("symbol-identity", "null-symbol", "tt-orthogonality", "plumbing"),
    "nu-solve": ("round-spectrum", "green-closed-form", "green-l2-norm", "energy-functional", "nu-definition",
                 "nu-bounds"),
}


class Collector:
    """Accumulates entries; a failing computation becomes one failed entry."""

    def __init__(self, cfg: SuiteConfig):
        self.cfg = cfg
        self.entries: list[ReportEntry] = []
        self.plots: dict[str, list[dict]] = {}

    def add(self, check: str, anchor: str, value: float, expected: float, tol_key: str | float,
            source: str = "exact", relation: str = "eq", budget: dict | None = None, message: str = "",
            scale: float = 1.0) -> ReportEntry:
        tol = self.cfg.tol(tol_key) if isinstance(tol_key, str) else float(tol_key) * self.cfg.tol_scale
        e = ReportEntry(check, anchor, float(value), float(expected), tol * scale, source, relation,
                        dict(budget or {}), message)
        self.entries.append(e)
        return e

    def guard(self, check: str, anchor: str, fn: Callable[[], None]) -> None:
        try:
            fn()
        except Exception as exc:  # any module error becomes a failed entry
            self.entries.append(failed_entry(check, anchor, exc))

    def plot(self, name: str, row: dict) -> None:
        self.plots.setdefault(name, []).append(row)


def gauge_entry(name: str) -> C.CatalogEntry:
    return next(e for e in C.gauge_catalog() if e.name == name)


def _count(cfg: SuiteConfig, full: int, minimal: int) -> int:
    return {"full": full, "minimal": minimal, "none": 0}[cfg.catalog]


# ---------------------------------------------------------------------------
# covariance


def covariance_suite(col: Collector, rng: np.random.Generator) -> None:
    x = rng.uniform(-3.0, 3.0, size=(100, 3))
    rnd, flat = MetricField.round(), MetricField.euclidean()

    def constants():
        pack = curvature_pipeline(rnd, x)
        col.add("round/scalar", "round-curvature", np.max(np.abs(pack.scalar - 6.0)), 0.0, "round_constants",
                "reference")
        col.add("round/q", "round-curvature", np.max(np.abs(pack.q_curvature - 15 / 8)), 0.0,
                "round_constants", "reference")
        p1 = paneitz_apply_exact(rnd, ScalarField.constant(1.0), x)
        col.add("round/paneitz-one", "paneitz-operator", np.max(np.abs(p1 + 15 / 16)), 0.0, "paneitz_one",
                "reference")
        fpack = curvature_pipeline(flat, x)
        col.add("flat/q", "round-curvature", np.max(np.abs(fpack.q_curvature)), 0.0, "round_constants", "exact")

    col.guard("round/constants", "round-curvature", constants)

    def paneitz_q():
        g = rnd.perturbed(C.random_gaussian_theta(rng, 1.2), 0.3)
        pts = x[:20] * 0.3
        geo = g.geometry(pts, 4)
        p1 = paneitz_apply_exact(g, ScalarField.constant(1.0), pts)
        col.add("perturbed/p1-vs-q", "paneitz-operator", np.max(np.abs(p1 + 0.5 * geo.q_curvature.value)), 0.0,
                "paneitz_one", "exact")
        col.add("perturbed/bianchi", "round-curvature", bianchi_residual(g, pts), 0.0, "round_constants", "exact")

    col.guard("perturbed/p1-vs-q", "paneitz-operator", paneitz_q)

    def conformal():
        rho = C.gaussian_scalar(1.3, rng.normal(size=3) * 0.3, 0.4).map(lambda j: 1.0 + j)
        phi = C.gaussian_scalar(1.0, rng.normal(size=3) * 0.3)
        pts = x[:30] * 0.4
        for name, g in (("round", rnd), ("flat", flat)):
            col.add(f"conformal/{name}", "conformal-covariance", conformal_covariance_residual(g, rho, phi, pts),
                    0.0, "conformal_covariance", "exact")

    col.guard("conformal", "conformal-covariance", conformal)

    def moebius():
        worst = 0.0
        for _ in range(10):
            F = S.random_moebius(rng)
            a, b = rng.normal(size=(10, 3)), rng.normal(size=(10, 3))
            worst = max(worst, S.moebius_covariance_residual(F, a, b))
        col.add("green/moebius", "green-covariance", worst, 0.0, "green_covariance", "exact")

    col.guard("green/moebius", "green-covariance", moebius)

    def closed_form():
        a, b = rng.normal(size=(20, 3)), rng.normal(size=(20, 3))
        chart = S.green_eval(a, b)
        col.add("green/chordal", "green-closed-form",
                np.max(np.abs(chart - S.green_ambient(to_sphere(a), to_sphere(b)))), 0.0, "green_values", "oracle",
                scale=10.0)
        spec = S.green_spectral(to_sphere(a), to_sphere(b), 2000)
        col.add("green/spectral", "green-closed-form", np.max(np.abs(chart - spec)), 0.0, 1e-9, "oracle")

    col.guard("green/closed-form", "green-closed-form", closed_form)


# ---------------------------------------------------------------------------
# expansion


def expansion_perturbations(cfg: SuiteConfig, rng: np.random.Generator) -> list[tuple[str, SymTensorField]]:
    out = [("gauss", C.random_gaussian_theta(rng, 1.0)),
           ("polybump", C.random_poly_bump_theta(rng, 2.0)),
           ("ambient", C.random_ambient_tensor(rng, 2).north)]
    return out[:_count(cfg, 3, 1)]


def adjoint_triples(rng: np.random.Generator, count: int):
    """Random Gaussian (h, phi, psi) triples with a Hermite rule matched to their product."""
    out = []
    for _ in range(count):
        wh, wa, wb = rng.uniform(0.8, 1.2, 3)
        h = C.random_gaussian_theta(rng, wh)
        phi = C.gaussian_scalar(wa, rng.uniform(-0.5, 0.5, 3))
        psi = C.gaussian_scalar(wb, rng.uniform(-0.5, 0.5, 3))
        scale = 1.0 / math.sqrt(1 / wh ** 2 + 1 / wa ** 2 + 1 / wb ** 2)
        out.append((h, phi, psi, hermite_rule(20, scale)))
    return out


def expansion_suite(col: Collector, rng: np.random.Generator) -> None:
    cfg = col.cfg
    perts = expansion_perturbations(cfg, rng)
    x = rng.normal(size=(12, 3)) * 0.6
    phi = C.gaussian_scalar(1.5, (0.2, -0.1, 0.0))
    lo, hi = 3.0 - cfg.tol("fd_slope"), 3.0 + cfg.tol("fd_slope")
    for gname, g in (("flat", MetricField.euclidean()), ("round", MetricField.round())):
        for pname, h in perts:
            for sel in SELECTORS:
                check = f"fd/{gname}/{pname}/{sel}"

                def run(sel=sel, g=g, h=h, check=check, gname=gname, pname=pname):
                    r = fd_validate(sel, g, h, x, phi, cfg.t_grid, (lo, hi))
                    col.add(check, "expansion-coefficients", r.slope, 3.0, "fd_slope", "oracle",
                            budget={"stencil": float(r.remainders[-1])})
                    for t, rem in zip(r.t, r.remainders):
                        col.plot("slopes", {"background": gname, "perturbation": pname, "selector": sel, "t": t,
                                            "remainder": float(rem), "slope": r.slope})

                col.guard(check, "expansion-coefficients", run)

            def p_one(g=g, h=h, gname=gname, pname=pname):
                q = q_expansion(g, h, x)
                col.add(f"p1-one/{gname}/{pname}", "paneitz-operator",
                        np.max(np.abs(p1_one(g, h, x) + 0.5 * q.order1)), 0.0, "paneitz_one", "exact",
                        scale=max(1.0, float(np.max(np.abs(q.order1)))))
                col.add(f"p2-one/{gname}/{pname}", "paneitz-operator",
                        np.max(np.abs(p2_one(g, h, x) + 0.5 * q.order2)), 0.0, "paneitz_one", "exact",
                        scale=max(1.0, float(np.max(np.abs(q.order2)))))

            col.guard(f"p-one/{gname}/{pname}", "paneitz-operator", p_one)
    g = MetricField.round()
    for i, (h, a, b, rule) in enumerate(adjoint_triples(rng, _count(cfg, 10, 2))):
        col.guard(f"adjoint/round/{i}", "adjoint-defect",
                  lambda i=i, h=h, a=a, b=b, rule=rule: col.add(
                      f"adjoint/round/{i}", "adjoint-defect", adjoint_defect_residual(g, h, a, b, rule), 0.0,
                      "adjoint_defect", "exact"))


# ---------------------------------------------------------------------------
# first variation


def first_variation_catalog(cfg: SuiteConfig, rng: np.random.Generator):
    bumps = C.bump_catalog(cfg.seed, 3)
    out = [(e.name, C.theta_on_sphere(e.theta)) for e in bumps]
    out.append(("ambient:linear", C.random_ambient_tensor(rng, 1)))
    out.append(("ambient:quadratic", C.random_ambient_tensor(rng, 2)))
    out.append(("lie:gauss", C.theta_on_sphere(gauge_entry("lie:gauss").theta)))
    order = [0, 3, 1, 4, 2, 5]
    return [out[i] for i in order][:_count(cfg, 6, 2)]


def first_variation_suite(col: Collector, rng: np.random.Generator) -> None:
    cfg = col.cfg
    cat = first_variation_catalog(cfg, rng)
    for name, h in cat:
        def pole(name=name, h=h):
            theta = V.pullback_theta(h.north)
            r = V.first_variation_pole(theta)
            col.add(f"I/{name}", "first-variation-pole", abs(r.value), 0.0, "first_variation", "exact",
                    "le", {"truncation": r.extrapolation_error}, scale=r.scale)
            for R, f in zip(r.radii, r.fluxes):
                col.plot("flux_vs_R", {"perturbation": name, "R": R, "flux": f})

        col.guard(f"I/{name}", "first-variation-pole", pole)

        def nu1(name=name, h=h):
            r = S.nu_first_variation(h)
            col.add(f"nu1/{name}/flux", "nu-first-variation", abs(r.value), 0.0, "first_variation", "exact",
                    "le", {"truncation": abs(S.NU1_FROM_FLUX) * r.flux.extrapolation_error}, scale=r.scale)
            col.add(f"nu1/{name}/volume", "nu-first-variation", abs(r.volume), 0.0, "first_variation", "exact",
                    "le", scale=r.scale)

        col.guard(f"nu1/{name}", "nu-first-variation", nu1)
    if cat:
        def offdiag():
            theta = C.random_poly_bump_theta(rng, 1.5)
            y = np.array([0.4, -0.2, 0.3])
            support = ((0.0, 0.0, 0.0), 1.5)
            a = V.offdiagonal_first_term(theta, y, "polar", support, n_r=48, n_theta=32)
            b = V.offdiagonal_first_term(theta, y, "multipole", support, n_r=48, n_theta=32, lmax=48)
            col.add("I-offdiag/polybump/routes", "first-variation-offdiagonal", a, b, "route_equivalence",
                    "oracle", scale=max(abs(b), 1e-10), budget={"quadrature": abs(a - b)})

        col.guard("I-offdiag/polybump/routes", "first-variation-offdiagonal", offdiag)


# ---------------------------------------------------------------------------
# second variation


def second_variation_suite(col: Collector, rng: np.random.Generator) -> None:
    cfg = col.cfg
    if cfg.catalog == "none":
        return
    gauge = C.gauge_catalog()
    bumps = C.bump_catalog(cfg.seed, 3)
    if cfg.catalog == "minimal":
        gauge = [e for e in gauge if e.name in ("lie:gauss", "conf:gauss")]
        bumps = bumps[:1]
    for e in gauge + bumps:
        def one(e=e):
            r = V.ii_evaluate(e.theta, e.quadrature)
            budget = {"quadrature": r.quadrature_error, "truncation": r.tail_bound}
            col.add(f"II/{e.name}/sign", "second-variation-pole", r.value, 0.0, "ii_sign", "exact", "le", budget)
            nrm = V.l2_norm_squared(e.theta, e.quadrature) if e.theta.decay_exponent < -1.5 else 1.0
            if e.kind == "bump":
                # strictly negative: II / |theta|^2 <= -margin
                col.add(f"II/{e.name}/negative", "second-variation-pole", r.value / nrm, -cfg.tol("ii_negative"),
                        0.0, "exact", "le", budget)
            else:
                col.add(f"II/{e.name}/gauge", "gauge-null", abs(r.value), 0.0, "ii_gauge", "exact", "le", budget,
                        scale=nrm)
            if e.spectral:
                p = Y.parseval_ii(e.theta)
                col.add(f"II/{e.name}/parseval", "symbol-identity", abs(r.value - p) / max(abs(r.value), 1e-10),
                        0.0, "route_equivalence", "oracle", "le", budget)

        col.guard(f"II/{e.name}", "second-variation-pole", one)

    def bilinear():
        a, b = bumps[0].theta, C.random_gaussian_theta(rng, 1.1)
        cfgq = bumps[0].quadrature
        ab = V.ii_bilinear(a, b, cfgq)
        ba = V.ii_bilinear(b, a, cfgq)
        pol = 0.5 * (V.ii_quadform(a + b, cfgq) - V.ii_quadform(a, cfgq) - V.ii_quadform(b, cfgq))
        col.add("II-bilinear/symmetric", "second-variation-bilinear", ab, ba, "route_equivalence", "exact",
                scale=max(abs(ab), 1e-10))
        col.add("II-bilinear/polarization", "second-variation-bilinear", ab, pol, "route_equivalence", "oracle",
                scale=max(abs(ab), 1e-10))
        # gauge shift invariance: II(theta + L_X g) = II(theta)
        lie = gauge_entry("lie:gauss")
        shifted = V.ii_quadform(a + lie.theta, V.QuadratureConfig(method="panels"))
        base = V.ii_quadform(a, V.QuadratureConfig(method="panels"))
        col.add("II-bilinear/gauge-shift", "gauge-null", shifted, base, "route_equivalence", "exact",
                scale=max(abs(base), 1e-10))

    col.guard("II-bilinear", "second-variation-bilinear", bilinear)

    def gauge_solver():
        worst = 0.0
        for _ in range(1000):
            H = rng.normal(size=(3, 3, 3))
            H = H + H.transpose(1, 0, 2)
            A = V.gauge_linear_solve(H)
            worst = max(worst, float(np.max(np.abs(A.symmetrized_gradient() - H))) / max(1.0, np.max(np.abs(H))))
        col.add("gauge/linear-solve", "gauge-linear-system", worst, 0.0, "gauge_solve", "exact", "le")

    col.guard("gauge/linear-solve", "gauge-linear-system", gauge_solver)

    hs = [("ambient:quadratic", C.random_ambient_tensor(rng, 2)),
          ("ambient:linear", C.random_ambient_tensor(rng, 1)),
          ("gauss:theta11", C.theta_on_sphere(C.gaussian_theta11()))]
    hs = hs[:_count(cfg, 3, 1)]
    for name, h in hs:
        def gauge_one(name=name, h=h):
            sol = V.gauge_normalize(h)
            col.add(f"gauge/{name}/residual", "gauge-normalization", sol.residual, 0.0, "gauge_residual", "exact",
                    "le")
            audit = V.gauge_decay_audit(sol)
            # growth rate above the allowed |x|^(-2-m), per derivative order m (vanishing orders skipped)
            excess = [s - (audit.exponent - m) for m, s in enumerate(audit.slopes) if math.isfinite(s)]
            col.add(f"gauge/{name}/decay", "gauge-normalization", max(excess, default=-1.0), 0.0, 0.25, "exact",
                    "le", message=f"slopes {[round(s, 3) for s in audit.slopes]}")

        col.guard(f"gauge/{name}", "gauge-normalization", gauge_one)
    if cfg.catalog == "full":
        def gauged_ii():
            sol = V.gauge_normalize(hs[0][1])
            r = V.ii_evaluate(sol.theta, sol.quadrature)
            col.add("II/gauged:ambient:quadratic/sign", "second-variation-pole", r.value, 0.0, "ii_sign", "exact",
                    "le", {"quadrature": r.quadrature_error, "truncation": r.tail_bound})

        col.guard("II/gauged:ambient:quadratic", "second-variation-pole", gauged_ii)
    if cfg.assemble:
        for e in bumps:
            def nu2(e=e):
                r = S.nu_second_variation(e.theta, assemble=True, cfg=e.quadrature)
                col.add(f"nu2/{e.name}", "nu-second-variation", r.assembly, r.value, "nu_second_variation",
                        "oracle", budget={"quadrature": r.assembly_error}, scale=abs(r.ii))

            col.guard(f"nu2/{e.name}", "nu-second-variation", nu2)


# ---------------------------------------------------------------------------
# symbol


def random_symmetric(rng: np.random.Generator, n: int) -> np.ndarray:
    A = rng.normal(size=(n, 3, 3)) + 1j * rng.normal(size=(n, 3, 3))
    return A + np.swapaxes(A, -1, -2)


def symbol_suite(col: Collector, rng: np.random.Generator, samples: int = 100_000) -> None:
    def identity():
        worst, lowest = 0.0, math.inf
        for s in range(0, samples, 20_000):
            n = min(20_000, samples - s)
            A = random_symmetric(rng, n)
            xi = rng.normal(size=(n, 3)) * np.exp(rng.uniform(-2, 2, size=(n, 1)))
            a = Y.symbol_integrand(A, xi)
            b = Y.rotated_symbol_value(A, xi)
            scale = 1.0 + np.sum(np.abs(A) ** 2, axis=(-2, -1)) * np.sum(xi * xi, -1) ** 2
            worst = max(worst, float(np.max(np.abs(a - b) / scale)))
            lowest = min(lowest, float(np.min(a / scale)))
        col.add("symbol/rotation-identity", "symbol-identity", worst, 0.0, "symbol_identity", "exact", "le")
        col.add("symbol/nonnegative", "symbol-identity", lowest, 0.0, "symbol_nonnegative", "exact", "ge")

    col.guard("symbol/rotation-identity", "symbol-identity", identity)

    def null():
        n = 1000
        xi = rng.normal(size=(n, 3))
        alpha = rng.normal(size=n) + 1j * rng.normal(size=n)
        beta = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
        bx = np.einsum("...i,...j->...ij", beta, xi)
        A = alpha[:, None, None] * np.eye(3) + bx + np.swapaxes(bx, -1, -2)
        scale = 1.0 + np.sum(np.abs(A) ** 2, axis=(-2, -1)) * np.sum(xi * xi, -1) ** 2
        col.add("symbol/null-kernel", "null-symbol", np.max(np.abs(Y.symbol_integrand(A, xi)) / scale), 0.0,
                "symbol_identity", "exact", "le")
        col.add("symbol/null-distance", "null-symbol", np.max(Y.null_distance(A, xi) / np.sqrt(scale)), 0.0,
                "symbol_identity", "exact", "le")
        th = Y.null_symbol_synthesize(lambda k: Y.gaussian_transform(k, 1.5),
                                      lambda k: k * Y.gaussian_transform(k, 2.0)[..., None])
        ii = Y.II_PREFACTOR * float(np.sum(Y.spectral_ii_integrand(th))) * th.grid.cell_volume
        norm = float(np.sum(th.values ** 2)) * th.grid.cell_volume
        col.add("symbol/null-synthesized", "null-symbol", abs(ii) / norm, 0.0, "null_symbol", "exact", "le")

    col.guard("symbol/null", "null-symbol", null)

    def tt():
        grid = Y.periodic_grid()
        theta = Y.GridTensor(gauge_entry("lie:gauss").theta(grid.points()), grid)
        kappa = V.random_tt_kappa(grid, rng)
        r = V.tt_orthogonality_residual(theta, kappa)
        # Cauchy-Schwarz bound of the weighted pairing
        w = V.tau_grid(grid)[..., None, None] ** -6
        norm = math.sqrt(float(np.sum(theta.values ** 2 * w)) * float(np.sum(kappa.values ** 2 * w))) * grid.cell_volume
        col.add("tt/orthogonality", "tt-orthogonality", abs(r) / norm, 0.0, "tt_orthogonality", "exact", "le")

    col.guard("tt/orthogonality", "tt-orthogonality", tt)

    def grid_roundtrip():
        import tempfile
        from pathlib import Path

        from ..gridio import read_grid, write_grid
        grid = Y.periodic_grid(2.0, 8)
        vals = rng.normal(size=tuple(grid.n) + (3, 3))
        with tempfile.TemporaryDirectory() as d:
            p = write_grid(Path(d) / "theta.pzg", vals, grid)
            back = read_grid(p, (3, 3))
        col.add("gridio/roundtrip", "plumbing", float(np.max(np.abs(back.values - vals))), 0.0, 0.0, "exact")

    col.guard("gridio/roundtrip", "plumbing", grid_roundtrip)


# ---------------------------------------------------------------------------
# nu


def random_poles(rng: np.random.Generator, n: int) -> np.ndarray:
    p = rng.normal(size=(n, 4))
    return p / np.linalg.norm(p, axis=-1, keepdims=True)


def nu_suite(col: Collector, rng: np.random.Generator) -> None:
    cfg = col.cfg
    L = cfg.truncation

    def spectrum():
        col.add("spectrum/lambda1", "round-spectrum", S.sigma(0), S.LAMBDA_1, 1e-15, "reference")
        col.add("spectrum/lambda2", "round-spectrum", S.sigma(1), S.LAMBDA_2, 1e-15, "reference")
        col.add("spectrum/unconstrained-min", "round-spectrum", S.nu_unconstrained(L), S.LAMBDA_1, 1e-15,
                "reference")

    col.guard("spectrum", "round-spectrum", spectrum)

    def green_values():
        col.add("green/G_N(N)", "green-closed-form", float(S.green_ambient(S.NORTH4, S.NORTH4)), 0.0, 0.0,
                "exact")
        col.add("green/G_N(0)", "green-closed-form", float(S.green_north_eval(np.zeros((1, 3)))[0]),
                -1.0 / (4 * math.pi), "green_values", "reference")
        col.add("green/l2-norm", "green-l2-norm", S.green_l2_norm(), 0.25, "green_l2", "reference")

    col.guard("green/values", "green-closed-form", green_values)

    def energies():
        one = S.SphereExpansion.constant(1.0)
        col.add("energy/E(1)", "energy-functional", S.energy(one), -15 * math.pi ** 2 / 8, "energy", "reference")
        z1 = S.SphereExpansion.zonal(1, S.NORTH4)
        col.add("energy/E(z1)", "energy-functional", S.energy(z1), S.energy_spectral(z1, z1), "energy", "oracle")
        i4 = S.i4_evaluate(one)
        col.add("energy/I4(1)", "energy-functional", i4, -15 * math.pi ** 2 / 8 * (2 * math.pi ** 2) ** (1 / 3),
                "energy", "oracle", scale=abs(i4))
        phi = S.sphere_scalar(lambda P: (P[0] * 0.5 + P[3] * P[3] - 0.25 * P[1] * P[2]).exp(), "test")
        col.add("green/reproducing", "energy-functional", S.green_reproducing_residual(phi), 0.0, "reproducing",
                "exact", "le")

    col.guard("energy", "energy-functional", energies)

    def solve():
        sol = S.nu_solve("N", L)
        b = {"truncation": abs(sol.raw_nu - sol.nu)}
        col.add(f"nu/N/L{L}/value", "nu-definition", sol.nu, 0.0, "nu_value", "reference", budget=b)
        col.add(f"nu/N/L{L}/alpha", "nu-definition", sol.alpha, 4.0, "nu_alpha", "reference", budget=b)
        col.add(f"nu/N/L{L}/correlation", "nu-definition", sol.green_correlation, 1.0, "nu_correlation",
                "reference", "ge", budget=b)
        col.add(f"nu/N/L{L}/constraint", "nu-definition", sol.constraint_residual, 0.0, "nu_euler_lagrange",
                "exact", "le")
        col.add(f"nu/N/L{L}/euler-lagrange", "nu-definition", sol.euler_lagrange_residual, 0.0,
                "nu_euler_lagrange", "exact", "le")

    col.guard(f"nu/N/L{L}", "nu-definition", solve)

    def convergence():
        for k in range(2, L + 1):
            raw = S._solve_secular(k, False)
            enriched = S._solve_secular(k, True)
            col.plot("nu_vs_L", {"L": k, "nu_raw": raw, "nu_enriched": enriched})

    col.guard("nu/convergence", "nu-definition", convergence)

    def bounds():
        lo, hi = math.inf, -math.inf
        for p in random_poles(rng, 10):
            sol = S.nu_solve(p, L)
            lo, hi = min(lo, sol.nu), max(hi, sol.nu)
        col.add("nu/random-poles/lower", "nu-bounds", lo, S.LAMBDA_1, "nu_bounds", "reference", "ge")
        col.add("nu/random-poles/upper", "nu-bounds", hi, S.LAMBDA_2, "nu_bounds", "reference", "le")

    col.guard("nu/random-poles", "nu-bounds", bounds)

    def dense():
        p = random_poles(rng, 1)[0]
        for k in (2, 3):
            col.add(f"nu/dense/L{k}", "nu-definition", S.nu_dense(p, k), S._solve_secular(k, False), "nu_dense",
                    "oracle")

    col.guard("nu/dense", "nu-definition", dense)


# ---------------------------------------------------------------------------

RUNNERS = {
    "covariance": covariance_suite,
    "expansion-validate": expansion_suite,
    "first-variation": first_variation_suite,
    "second-variation": second_variation_suite,
    "symbol-check": symbol_suite,
    "nu-solve": nu_suite,
}


def run_suite(cfg: SuiteConfig, suite: str) -> Report:
    """Run one suite (or ``all``) with a generator seeded from the config."""
    names = SUITES if suite == "all" else (suite,)
    for n in names:
        if n not in RUNNERS:
            raise KeyError(f"unknown suite {n!r}; choose from {SUITES + ('all',)}")
    col = Collector(cfg)
    for n in names:
        rng = np.random.default_rng([cfg.seed, SUITES.index(n)])
        if cfg.catalog == "none" and n in ("expansion-validate", "first-variation", "second-variation"):
            continue
        RUNNERS[n](col, rng)
    return Report(suite, cfg.seed, cfg.as_dict(), col.entries, col.plots)
