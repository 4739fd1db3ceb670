"""Central finite-difference stencils of fourth-order accuracy."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

ACCURACY = 4


@lru_cache(maxsize=None)
def central_stencil(deriv: int, accuracy: int = ACCURACY) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and weights of the centered stencil for d^deriv/dx^deriv at unit spacing.

    Weights solve the Taylor moment conditions sum_j w_j o_j^m / m! = [m == deriv].
    """
    if deriv == 0:
        return np.array([0]), np.array([1.0])
    half = (deriv + 1) // 2 - 1 + accuracy // 2
    offsets = np.arange(-half, half + 1)
    n = offsets.size
    vander = np.array([[float(o) ** m for o in offsets] for m in range(n)])
    rhs = np.zeros(n)
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    weights = np.linalg.solve(vander, rhs)
    # symmetric/antisymmetric structure is exact in theory; enforce it
    sign = (-1.0) ** deriv
    weights = 0.5 * (weights + sign * weights[::-1])
    return offsets, weights


def stencil_margin(max_deriv: int) -> int:
    return max(int(np.abs(central_stencil(d)[0]).max()) for d in range(max_deriv + 1))
