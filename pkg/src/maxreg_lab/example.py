"""Checks tied to the concrete heat problem: admissibility exponents, the
boundary-trace and interpolation inequalities, and the boundary adjoint."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, lp_norm
from .operators import ExtendedSystem, derivative_matrix, dirichlet_map, second_derivative_matrix

INTERPOLATION_CONSTANT = 9.0


@dataclass(frozen=True)
class Exponents:
    """Exponents for ``1 < p < 3``.

    ``beta`` is the Favard defect of the Dirichlet range, ``gamma`` a valid
    fractional-power exponent for the observation and ``r_range`` the open
    interval of admissible integrability exponents ``(2p/(p+1), 1/gamma)``.
    """

    p: float
    beta: float
    gamma_range: tuple
    gamma: float
    r_range: tuple

    def admits(self, r: float) -> bool:
        return self.r_range[0] < r < self.r_range[1]


def admissibility_exponents(p: float, gamma: float | None = None) -> Exponents:
    if not 1 < p < 3:
        raise ValueError(f"exponents are defined for 1 < p < 3, got {p}")
    lo, hi = 1 / 3, 1 / p
    if gamma is None:
        gamma = 0.5 * (lo + min(hi, 0.5))
    if not lo < gamma < hi:
        raise ValueError(f"gamma must lie in ({lo:.6g}, {hi:.6g}), got {gamma}")
    beta = (p - 1) / (2 * p)
    if beta + gamma >= 1:
        raise ValueError("beta + gamma must stay below 1")
    return Exponents(p, beta, (lo, hi), gamma, (2 * p / (p + 1), 1 / gamma))


def trace_inequality(g: GridFunction, p: float = 2.0) -> tuple[float, float]:
    """``(|g(1) - g(0)|, ||g'||_p)``; the first never exceeds the second."""
    dg = GridFunction(g.grid, derivative_matrix(g.grid) @ g.values)
    return float(abs(g.values[-1] - g.values[0])), lp_norm(dg, p)


def interpolation_inequality(g: GridFunction, eps: float, p: float = 2.0) -> tuple[float, float]:
    """``(||g'||_p, (9/eps)||g||_p + eps ||g''||_p)`` with finite-difference derivatives."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    grid = g.grid
    d1 = lp_norm(GridFunction(grid, derivative_matrix(grid) @ g.values), p)
    d2 = lp_norm(GridFunction(grid, second_derivative_matrix(grid) @ g.values), p)
    return d1, INTERPOLATION_CONSTANT / eps * lp_norm(g, p) + eps * d2


def boundary_adjoint_defect(sys: ExtendedSystem, lam: complex, k: int) -> float:
    """``|<D_lam, (lam - A) phi> - phi(1)|`` for ``phi = cos(k pi s)``.

    ``phi`` lies in the domain of the (self-adjoint) free operator, so the
    pairing isolates the boundary functional dual to the control, a point
    evaluation at ``s = 1``.  Quadrature is trapezoidal, hence O(h^2).
    """
    s = sys.grid.nodes
    phi = np.cos(k * np.pi * s)
    rhs = (lam + (k * np.pi) ** 2) * phi
    D = dirichlet_map(sys, lam).profile.values
    pairing = np.sum(sys.grid.weights * D * rhs)
    return float(abs(pairing - phi[-1]))
