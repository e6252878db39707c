"""Discrete boundary-perturbed heat operator on [0, 1].

The maximal operator ``A_m g = g''`` is discretized by second differences at
the interior nodes.  Three boundary functionals act on nodal values:

* the left Neumann row ``g'(0)``,
* ``G g = g'(1)`` (the boundary operator defining the free generator),
* ``K g = g(1) - g(0)`` (the feedback observation).

Generators are obtained by eliminating the two endpoint values with the
boundary equations.  Their state coordinates are the interior nodal values;
``LinearMap.lift`` rebuilds full grid functions from a state.  Operator norms
on the state space use the weights ``h * (3/2, 1, ..., 1, 3/2)``.  These weights
form a second-order quadrature on [0, 1] and are exactly the inner product in
which the discrete free (Neumann) generator is self-adjoint.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FeedbackSingularError, NearSpectrumError, NearSpectrumWarning, NumericalError
from .grid import Grid, GridFunction, lp_norm

COND_LIMIT = 1e12
NEAR_SPECTRUM_RTOL = 1e-3


class Boundary(Enum):
    FREE = "free"
    CLOSED_LOOP = "closed_loop"


@dataclass(frozen=True, eq=False)
class BoundaryFunctional:
    """Linear functional ``g -> sum_j weights[j] * g(s_j)``."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __call__(self, g) -> complex:
        values = g.values if isinstance(g, GridFunction) else np.asarray(g)
        return complex(self.weights @ values)

    def is_zero(self) -> bool:
        return not np.any(self.weights)


@dataclass(frozen=True, eq=False)
class ExtendedSystem:
    grid: Grid
    left_row: BoundaryFunctional
    g_row: BoundaryFunctional
    k_row: BoundaryFunctional
    boundary_dim: int = 1

    def __post_init__(self):
        if self.g_row.is_zero():
            raise ValueError("boundary functional G must be nonzero")

    def interior_apply(self, values: np.ndarray) -> np.ndarray:
        """Second differences at nodes 1..n-1 (works along the last axis)."""
        v = np.asarray(values)
        return (v[..., :-2] - 2 * v[..., 1:-1] + v[..., 2:]) / self.grid.h**2

    def without_feedback(self) -> "ExtendedSystem":
        return replace(self, k_row=BoundaryFunctional(np.zeros(self.grid.size)))

    @cached_property
    def state_weights(self) -> np.ndarray:
        return energy_weights(self.grid)

    def boundary_rows(self, bc: Boundary) -> np.ndarray:
        """The two rows that close the system: left Neumann row and ``G`` (or ``G - K``)."""
        right = self.g_row.weights
        if bc is Boundary.CLOSED_LOOP:
            right = right - self.k_row.weights
        return np.vstack([self.left_row.weights, right])

    def lift_matrix(self, bc: Boundary) -> np.ndarray:
        """``E`` with ``g = E u`` for interior values ``u`` satisfying the boundary rows."""
        n = self.grid.n
        rows = self.boundary_rows(bc)
        edge = rows[:, [0, n]]
        if abs(np.linalg.det(edge)) < 1e-14 * np.abs(edge).max() ** 2:
            raise NumericalError("degenerate boundary rows: endpoint values cannot be eliminated")
        elim = -np.linalg.solve(edge, rows[:, 1:n])
        lift = np.zeros((n + 1, n - 1))
        lift[1:n] = np.eye(n - 1)
        lift[[0, n]] = elim
        return lift

    @cached_property
    def _free_tridiagonal(self):
        """Symmetrized tridiagonal form of the free generator, or None."""
        n = self.grid.n
        lift = self.lift_matrix(Boundary.FREE)
        h2 = self.grid.h**2
        diag = np.full(n - 1, -2.0 / h2)
        upper = np.full(n - 2, 1.0 / h2)
        lower = np.full(n - 2, 1.0 / h2)
        left, right = lift[0] / h2, lift[n] / h2
        if np.any(left[2:]) or np.any(right[:-2]):
            return None
        diag[0] += left[0]
        upper[0] += left[1]
        diag[-1] += right[-1]
        lower[-1] += right[-2]
        prod = upper * lower
        if np.any(prod <= 0):
            return None
        return diag, np.sqrt(prod)

    def free_eigenvalues_near(self, lam: complex, radius: float) -> np.ndarray:
        """Free-generator eigenvalues within ``radius`` of ``Re lam`` (real spectrum)."""
        tri = self._free_tridiagonal
        if tri is None:
            ev = np.linalg.eigvals(generator_matrix(self, Boundary.FREE).matrix)
            return ev[np.abs(ev - lam) <= radius + abs(complex(lam).imag)]
        d, e = tri
        lo, hi = complex(lam).real - radius, complex(lam).real + radius
        return sla.eigvalsh_tridiagonal(d, e, select="v", select_range=(lo, hi))


def energy_weights(grid: Grid) -> np.ndarray:
    w = np.full(grid.n - 1, grid.h)
    w[0] = w[-1] = 1.5 * grid.h
    w.setflags(write=False)
    return w


def assemble_extended(grid: Grid) -> ExtendedSystem:
    n, h = grid.n, grid.h
    left = np.zeros(n + 1)
    left[:3] = np.array([-1.5, 2.0, -0.5]) / h
    g = np.zeros(n + 1)
    g[-3:] = np.array([0.5, -2.0, 1.5]) / h
    k = np.zeros(n + 1)
    k[0], k[n] = -1.0, 1.0
    return ExtendedSystem(grid, BoundaryFunctional(left), BoundaryFunctional(g), BoundaryFunctional(k))


def operator_norm(matrix: np.ndarray, w_out: np.ndarray, w_in: np.ndarray) -> float:
    """Spectral norm between weighted l2 spaces."""
    scaled = np.sqrt(w_out)[:, None] * np.asarray(matrix) / np.sqrt(w_in)[None, :]
    return float(np.linalg.norm(scaled, 2))


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Square operator acting on grid functions through a state space.

    ``matrix`` acts on state coordinates.  For generators the state is the
    vector of interior values and ``lift`` restores the endpoint values; for
    plain node-to-node maps ``lift`` is None and the state is the full vector.
    """

    grid: Grid
    matrix: np.ndarray
    lift: np.ndarray | None = None
    weights: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        M = np.array(self.matrix)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"operator matrix must be square, got {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ValueError("operator matrix has non-finite entries")
        expected = self.grid.size if self.lift is None else self.grid.n - 1
        if M.shape[0] != expected:
            raise ValueError(f"matrix dimension {M.shape[0]} does not match grid (expected {expected})")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        if self.weights is None:
            w = self.grid.weights if self.lift is None else energy_weights(self.grid)
            object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_lifted(self) -> bool:
        return self.lift is not None

    @property
    def state_nodes(self) -> np.ndarray:
        s = self.grid.nodes
        return s if self.lift is None else s[1:-1]

    def restrict(self, values: np.ndarray) -> np.ndarray:
        """Grid values -> state coordinates (along the last axis)."""
        v = np.asarray(values)
        return v if self.lift is None else v[..., 1:-1]

    def expand(self, state: np.ndarray) -> np.ndarray:
        """State coordinates -> grid values (along the last axis)."""
        x = np.asarray(state)
        return x if self.lift is None else x @ self.lift.T

    def apply(self, g: GridFunction) -> GridFunction:
        return GridFunction(self.grid, self.expand(self.matrix @ self.restrict(g.values)))

    def full(self) -> np.ndarray:
        """Dense node-to-node matrix ``lift @ matrix @ restrict``."""
        if self.lift is None:
            return np.array(self.matrix)
        return self.lift @ self.matrix @ _restriction(self.grid)

    def with_matrix(self, matrix: np.ndarray, label: str | None = None) -> "LinearMap":
        return replace(self, matrix=matrix, label=self.label if label is None else label)

    def shifted(self, omega: float) -> "LinearMap":
        """``map - omega I``."""
        return self.with_matrix(self.matrix - omega * np.eye(self.dim), f"{self.label}-{omega:g}")

    def norm(self) -> float:
        return operator_norm(self.matrix, self.weights, self.weights)


def _restriction(grid: Grid) -> np.ndarray:
    R = np.zeros((grid.n - 1, grid.n + 1))
    R[:, 1:-1] = np.eye(grid.n - 1)
    return R


def generator_matrix(sys: ExtendedSystem, bc: Boundary) -> LinearMap:
    """Free generator (``G g = 0``) or closed-loop generator (``G g = K g``)."""
    bc = Boundary(bc)
    n, h2 = sys.grid.n, sys.grid.h**2
    lift = sys.lift_matrix(bc)
    A = (np.diag(np.full(n - 1, -2.0)) + np.diag(np.ones(n - 2), 1) + np.diag(np.ones(n - 2), -1)) / h2
    A[0] += lift[0] / h2
    A[-1] += lift[n] / h2
    return LinearMap(sys.grid, A, lift=lift, weights=sys.state_weights, label=bc.value)


def stabilizing_shift(map: LinearMap) -> float:
    """``1 + max(0, spectral abscissa)``."""
    return 1.0 + max(0.0, spectral_abscissa(map))


def spectral_abscissa(map: LinearMap) -> float:
    return float(np.max(np.linalg.eigvals(map.matrix).real))


def spectrum(map: LinearMap) -> np.ndarray:
    """All eigenvalues, sorted by real part (descending)."""
    try:
        ev = np.linalg.eigvals(map.matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue solver failed: {exc}") from exc
    order = np.lexsort((ev.imag, -ev.real))
    return ev[order]


def _checked_inverse(B: np.ndarray, lam: complex, map: LinearMap | None = None) -> np.ndarray:
    try:
        inv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        inv = None
    if inv is None or not np.all(np.isfinite(inv)) or (
        np.linalg.norm(B, 1) * np.linalg.norm(inv, 1) > COND_LIMIT
    ):
        nearest = None
        if map is not None:
            ev = np.linalg.eigvals(map.matrix)
            nearest = complex(ev[np.argmin(np.abs(ev - lam))])
        raise NearSpectrumError(f"lambda={lam} lies on the discrete spectrum (nearest eigenvalue {nearest})", nearest)
    return inv


def resolvent_state(map: LinearMap, lam: complex) -> np.ndarray:
    """``(lam I - matrix)^{-1}`` in state coordinates."""
    B = lam * np.eye(map.dim) - map.matrix
    return _checked_inverse(B, lam, map)


def resolvent_full(map: LinearMap, lam: complex) -> np.ndarray:
    """Node-to-node matrix of ``R(lam, map)`` (endpoint inputs are ignored for generators)."""
    Rs = resolvent_state(map, lam)
    if map.lift is None:
        return Rs
    return map.lift @ Rs @ _restriction(map.grid)


def resolvent_apply(map: LinearMap, lam: complex, f: GridFunction) -> GridFunction:
    x = resolvent_state(map, lam) @ map.restrict(f.values)
    return GridFunction(map.grid, map.expand(x))


@dataclass(frozen=True)
class DirichletMap:
    """Solution of ``(lam - A_m) g = 0``, left Neumann row, ``G g = 1``."""

    lam: complex
    profile: GridFunction
    boundary_dim: int = 1

    def __call__(self, u: complex = 1.0) -> GridFunction:
        return self.profile * u


def _check_dirichlet_point(sys: ExtendedSystem, lam: complex):
    lam = complex(lam)
    radius = NEAR_SPECTRUM_RTOL * max(1.0, abs(lam))
    if lam.real > radius or abs(lam.imag) > radius:
        return
    near = sys.free_eigenvalues_near(lam, radius)
    if len(near) == 0:
        return
    nearest = complex(near[np.argmin(np.abs(near - lam))])
    dist = abs(nearest - lam)
    scale = abs(lam) + 4.0 / sys.grid.h**2
    if dist == 0 or scale / dist > COND_LIMIT:
        raise NearSpectrumError(
            f"Dirichlet problem singular at lambda={lam}: nearest free eigenvalue {nearest.real:.15g}", nearest
        )
    warnings.warn(
        f"lambda={lam} is within {dist:.3g} of the free eigenvalue {nearest.real:.15g}",
        NearSpectrumWarning,
        stacklevel=3,
    )


def dirichlet_map(sys: ExtendedSystem, lam: complex) -> DirichletMap:
    lam = complex(lam)
    _check_dirichlet_point(sys, lam)
    n, h = sys.grid.n, sys.grid.h
    # interior rows scaled by h^2, boundary rows by h
    main = np.full(n + 1, 2.0 + lam * h * h, dtype=complex)
    off = -np.ones(n, dtype=complex)
    M = sp.diags([off, main, off], [-1, 0, 1], shape=(n + 1, n + 1), format="lil", dtype=complex)
    M[0, :] = sys.left_row.weights * h
    M[n, :] = sys.g_row.weights * h
    rhs = np.zeros(n + 1, dtype=complex)
    rhs[n] = h
    profile = spla.spsolve(M.tocsc(), rhs)
    if not np.all(np.isfinite(profile)):
        raise NearSpectrumError(f"Dirichlet solve failed at lambda={lam}")
    return DirichletMap(lam, GridFunction(sys.grid, profile))


def dirichlet_closed_form(lam: complex, s) -> np.ndarray | complex:
    """``cosh(sqrt(lam) s) / (sqrt(lam) sinh(sqrt(lam)))`` with Re sqrt(lam) > 0."""
    lam = complex(lam)
    if lam.imag == 0 and lam.real <= 0:
        raise ValueError(f"lambda={lam} lies on the branch cut (-inf, 0]")
    r = np.sqrt(lam)
    s = np.asarray(s, dtype=float)
    # overflow-free rewriting of cosh(r s)/sinh(r)
    val = (np.exp(r * (s - 1)) + np.exp(-r * (s + 1))) / (1 - np.exp(-2 * r)) / r
    return complex(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class ResolventResidual:
    product: float
    additive: float

    @property
    def worst(self) -> float:
        return max(self.product, self.additive)


def feedback_factor(sys: ExtendedSystem, lam: complex, D: DirichletMap | None = None) -> complex:
    """``1 - K D_lam``; raises when it vanishes."""
    D = dirichlet_map(sys, lam) if D is None else D
    gap = 1.0 - sys.k_row(D.profile)
    if abs(gap) < 1e-12:
        raise FeedbackSingularError(f"feedback singular at lambda={lam}: 1 - K D = {gap}")
    return gap


def resolvent_identity_residual(sys: ExtendedSystem, lam: complex) -> ResolventResidual:
    """Compare ``R(lam, closed loop)`` with the feedback formulas built from free objects.

    product form:  ``(I - D K)^{-1} R(lam, A)``
    additive form: ``R(lam, A) + D (1 - K D)^{-1} K R(lam, A)``
    """
    D = dirichlet_map(sys, lam)
    gap = feedback_factor(sys, lam, D)
    Rf = resolvent_full(generator_matrix(sys, Boundary.FREE), lam)
    Rc = resolvent_full(generator_matrix(sys, Boundary.CLOSED_LOOP), lam)
    d, k = D.profile.values, sys.k_row.weights
    w = sys.grid.weights
    product = np.linalg.solve(np.eye(sys.grid.size) - np.outer(d, k), Rf)
    additive = Rf + np.outer(d, k @ Rf) / gap
    return ResolventResidual(operator_norm(Rc - product, w, w), operator_norm(Rc - additive, w, w))


def greiner_residual(sys: ExtendedSystem, lam: complex, mu: complex) -> float:
    """Grid L2 norm of ``D_lam - (I - (lam - mu) R(lam, A)) D_mu``."""
    lam, mu = complex(lam), complex(mu)
    D_lam = dirichlet_map(sys, lam).profile
    if lam == mu:
        return 0.0
    D_mu = dirichlet_map(sys, mu).profile
    free = generator_matrix(sys, Boundary.FREE)
    rhs = D_mu - (lam - mu) * resolvent_apply(free, lam, D_mu)
    return lp_norm(D_lam - rhs, 2)


def transfer_value(sys: ExtendedSystem, lam: complex) -> complex:
    """``H(lam) = K D_lam``."""
    return sys.k_row(dirichlet_map(sys, lam).profile)


def derivative_matrix(grid: Grid) -> np.ndarray:
    """Second-order first derivative: central inside, one-sided 3-point at the ends."""
    n, h = grid.n, grid.h
    D1 = np.zeros((n + 1, n + 1))
    idx = np.arange(1, n)
    D1[idx, idx - 1] = -0.5 / h
    D1[idx, idx + 1] = 0.5 / h
    D1[0, :3] = np.array([-1.5, 2.0, -0.5]) / h
    D1[n, -3:] = np.array([0.5, -2.0, 1.5]) / h
    return D1


def second_derivative_matrix(grid: Grid) -> np.ndarray:
    """Second-order second derivative: central inside, one-sided 4-point at the ends."""
    n, h2 = grid.n, grid.h**2
    D2 = np.zeros((n + 1, n + 1))
    idx = np.arange(1, n)
    D2[idx, idx - 1] = 1 / h2
    D2[idx, idx] = -2 / h2
    D2[idx, idx + 1] = 1 / h2
    D2[0, :4] = np.array([2.0, -5.0, 4.0, -1.0]) / h2
    D2[n, -4:] = np.array([-1.0, 4.0, -5.0, 2.0]) / h2
    return D2


def _coefficient(grid: Grid, c) -> np.ndarray:
    if isinstance(c, GridFunction):
        return c.values
    return np.broadcast_to(np.asarray(c, dtype=complex), (grid.size,))


def perturbation_matrix(grid: Grid, b, c) -> LinearMap:
    """``(P g)(s) = b(s) g'(s) + c(s) g(s)`` on nodal values."""
    bv, cv = _coefficient(grid, b), _coefficient(grid, c)
    P = bv[:, None] * derivative_matrix(grid) + np.diag(cv)
    if not np.any(P.imag):
        P = P.real
    return LinearMap(grid, P, label="P")


def add_perturbation(gen: LinearMap, P: LinearMap) -> LinearMap:
    """Generator ``gen + P`` on the domain of ``gen``."""
    if P.is_lifted:
        raise ValueError("the perturbation must be a node-to-node map")
    if gen.lift is None:
        return gen.with_matrix(gen.matrix + P.matrix, f"{gen.label}+P")
    coupling = (P.matrix @ gen.lift)[1:-1]
    return gen.with_matrix(gen.matrix + coupling, f"{gen.label}+P")


def feedback_gap(sys: ExtendedSystem, lam: complex) -> tuple[float, float]:
    """(smallest singular value of ``lam - closed loop``, ``|1 - K D_lam|``).

    Both vanish together: lam is a closed-loop eigenvalue iff ``K D_lam = 1``.
    """
    cl = generator_matrix(sys, Boundary.CLOSED_LOOP)
    sw = np.sqrt(cl.weights)
    B = sw[:, None] * (lam * np.eye(cl.dim) - cl.matrix) / sw[None, :]
    smin = float(np.linalg.svd(B, compute_uv=False)[-1])
    D = dirichlet_map(sys, lam)
    return smin, float(abs(1.0 - sys.k_row(D.profile)))
