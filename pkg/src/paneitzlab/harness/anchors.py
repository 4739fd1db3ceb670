"""Fixed registry of the identities the suites check.

Every report entry carries one of these anchor ids (or ``plumbing``).
"""

from __future__ import annotations

ANCHORS: dict[str, str] = {
    "round-curvature": "scalar and Q-curvature constants of the round metric in the stereographic chart",
    "paneitz-operator": "Paneitz operator and Q-curvature formulas; P 1 = -Q/2",
    "conformal-covariance": "conformal covariance of the Paneitz operator",
    "green-covariance": "transformation law of the Green's function under conformal change",
    "expansion-coefficients": "second-order Taylor coefficients of curvature and of P along g + t h",
    "adjoint-defect": "defect of the first-order Paneitz variation from self-adjointness",
    "first-variation-pole": "first variation of the Green's function pole value vanishes",
    "first-variation-offdiagonal": "first variation I(N, q, h) in the flat chart",
    "second-variation-pole": "second variation II(N, N, h) as a flat-chart quadratic form",
    "second-variation-bilinear": "symmetric bilinear form of the second variation",
    "gauge-null": "II vanishes on L_X g + f g and is invariant under such shifts",
    "gauge-linear-system": "unique quadratic vector field solving the symmetrized-gradient system",
    "gauge-normalization": "gauge fixing of h to vanish to first order at the pole",
    "symbol-identity": "Fourier symbol of the quadratic form and its rotated nonnegative form",
    "null-symbol": "kernel of the symbol: alpha delta + xi beta + beta xi",
    "tt-orthogonality": "gauge-null tensors are L^2-orthogonal to TT tensors",
    "round-spectrum": "spectrum of the round Paneitz operator",
    "green-closed-form": "closed-form Green's function of the round sphere",
    "green-l2-norm": "L^2 norm of G_N",
    "energy-functional": "energy E(u, v) and the functional I_4",
    "nu-definition": "constrained invariant nu_p with its Euler-Lagrange equation",
    "nu-bounds": "lambda_1 <= nu_p <= lambda_2",
    "nu-first-variation": "first variation of nu_p vanishes on the round sphere",
    "nu-second-variation": "nu^(2) = -16 II and its term-by-term assembly",
    "plumbing": "artifact plumbing with no mathematical anchor",
}


def check_anchor(anchor: str) -> str:
    if anchor not in ANCHORS:
        raise KeyError(f"unknown anchor {anchor!r}")
    return anchor
