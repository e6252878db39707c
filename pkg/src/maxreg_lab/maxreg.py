"""Maximal-regularity diagnostics: per-trajectory constants and the norm of
``f -> G int_0^t S(t-s) f(s) ds`` on Bochner spaces."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError
from .grid import Grid, TimeGrid, TimeSignal, bochner_norm, time_derivative, weighted_lp
from .operators import (
    Boundary,
    LinearMap,
    add_perturbation,
    assemble_extended,
    generator_matrix,
    perturbation_matrix,
    spectral_abscissa,
    stabilizing_shift,
)
from .semigroup import _stability_tol, apply_frames, exp_and_phi1, mild_solution


@dataclass(frozen=True)
class MaxRegReport:
    p: float
    T: float
    dz: float
    z: float
    gz: float
    f: float
    residual: float
    generator: str = ""

    @property
    def ratio(self) -> float:
        return (self.dz + self.z + self.gz) / self.f


class Method(str, Enum):
    EXACT_P2 = "ExactP2"
    RANDOM_SEARCH = "RandomSearch"


@dataclass(frozen=True)
class RNormEstimate:
    method: Method
    value: float
    iterations: int
    converged: bool
    shift: float = 0.0
    lower_bound: bool = False


def _auto_shift(map: LinearMap) -> float:
    """0 for generators of negative type, otherwise the canonical stabilizing shift."""
    if spectral_abscissa(map) < -_stability_tol(map.matrix):
        return 0.0
    return stabilizing_shift(map)


def maxreg_report(map: LinearMap, f: TimeSignal, p: float = 2.0) -> MaxRegReport:
    """Norms of ``z``, ``z'`` and ``Gz`` for ``z' = Gz + f``, ``z(0) = 0``.

    ``residual`` is the Bochner norm of ``z' - Gz - f`` with ``z'`` from
    second-order differences, a consistency check on the trajectory.
    """
    fn = bochner_norm(f, p)
    if fn == 0.0:
        raise ValueError("maximal-regularity ratio needs nonzero forcing")
    shift = 0.0 if spectral_abscissa(map) <= _stability_tol(map.matrix) else stabilizing_shift(map)
    z = mild_solution(map, f, shift=shift)
    dz = time_derivative(z)
    gz = apply_frames(map, z)
    res = bochner_norm(dz - gz - f, p)
    return MaxRegReport(p, f.timegrid.T, bochner_norm(dz, p), bochner_norm(z, p),
                        bochner_norm(gz, p), fn, res, map.label)


def _left(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply ``A`` along axis 1 of a (time, state[, block]) array."""
    return x @ A.T if x.ndim == 2 else A @ x


class _ConvolutionOperator:
    """Discrete ``f -> G z`` on state sequences, with its weighted adjoint.

    Input and output carry the weights ``tau_k w_j`` (time trapezoid times state
    weights); ``scaled`` works in the unweighted coordinates where the
    Euclidean norm equals the weighted one.
    """

    def __init__(self, gen: np.ndarray, tg: TimeGrid, weights: np.ndarray):
        self.G = gen
        self.E, self.F = exp_and_phi1(gen, tg.dt)
        self.m = tg.m
        self.sqw = np.sqrt(np.outer(tg.weights, weights))

    def forward(self, f: np.ndarray) -> np.ndarray:
        """``f`` of shape (m+1, d, ...) -> ``G z`` of the same shape."""
        z = np.zeros_like(f)
        u = 0.5 * (f[:-1] + f[1:])
        for k in range(self.m):
            z[k + 1] = self.E @ z[k] + self.F @ u[k]
        return _left(self.G, z)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """Euclidean adjoint of :meth:`forward`."""
        zs = _left(self.G.T, y)
        lam = np.zeros_like(zs)
        lam[-1] = zs[-1]
        for k in range(self.m - 1, 0, -1):
            lam[k] = zs[k] + self.E.T @ lam[k + 1]
        u = _left(self.F.T, lam[1:])
        f = np.zeros_like(y)
        f[:-1] += 0.5 * u
        f[1:] += 0.5 * u
        return f

    def _scale(self, x: np.ndarray, power: float) -> np.ndarray:
        s = self.sqw**power
        return s.reshape(s.shape + (1,) * (x.ndim - 2)) * x

    def scaled(self, x: np.ndarray) -> np.ndarray:
        return self._scale(self.forward(self._scale(x, -1)), 1)

    def scaled_adjoint(self, y: np.ndarray) -> np.ndarray:
        return self._scale(self.adjoint(self._scale(y, 1)), -1)


def _weighted_bochner(x: np.ndarray, tw: np.ndarray, sw: np.ndarray, p: float) -> float:
    return float(weighted_lp(weighted_lp(x, sw, p, axis=1), tw, p))


def _lanczos_norm(op: _ConvolutionOperator, d: int, tol: float, maxiter: int,
                  rng: np.random.Generator) -> tuple[float, int, bool]:
    """Largest singular value of the weighted operator.

    Lanczos on the normal operator ``S^T S`` with full reorthogonalization
    (a Krylov-accelerated power iteration).  The top Ritz value increases
    monotonically; iteration stops once its relative change is below ``tol``.
    The leading singular values cluster near the multiplier bound, so plain
    power iteration stalls long before this criterion is met.
    """
    N = (op.m + 1) * d
    shape = (op.m + 1, d)
    maxiter = min(maxiter, N)
    Q = np.zeros((maxiter + 1, N))
    q = rng.standard_normal(N)
    Q[0] = q / np.linalg.norm(q)
    alpha: list[float] = []
    beta: list[float] = []
    prev = theta = 0.0
    for j in range(maxiter):
        w = op.scaled_adjoint(op.scaled(Q[j].reshape(shape))).ravel()
        a = float(Q[j] @ w)
        alpha.append(a)
        w -= Q[: j + 1].T @ (Q[: j + 1] @ w)
        w -= Q[: j + 1].T @ (Q[: j + 1] @ w)
        if j == 0:
            theta = a
        else:
            theta = float(sla.eigh_tridiagonal(np.array(alpha), np.array(beta), eigvals_only=True,
                                               select="i", select_range=(j, j))[0])
        b = float(np.linalg.norm(w))
        if j >= 3 and abs(theta - prev) <= tol * abs(theta):
            return float(np.sqrt(theta)), j + 1, True
        if b <= 1e-14 * max(1.0, abs(theta)):
            return float(np.sqrt(theta)), j + 1, True
        prev = theta
        beta.append(b)
        Q[j + 1] = w / b
    return float(np.sqrt(theta)), maxiter, False


def band_limited_signal(rng: np.random.Generator, tg: TimeGrid, nodes: np.ndarray,
                        modes: int = 10) -> np.ndarray:
    """Random smooth field: Gaussian combination of low cosine modes in ``t`` and ``s``."""
    t = tg.times / tg.T
    c = rng.standard_normal((modes, modes)) / (1.0 + np.add.outer(np.arange(modes), np.arange(modes)))
    Ct = np.cos(np.pi * np.outer(t, np.arange(modes)))
    Cs = np.cos(np.pi * np.outer(np.arange(modes), nodes))
    return Ct @ c @ Cs


def maxreg_norm_estimate(map: LinearMap, tg: TimeGrid, p: float = 2.0,
                         method: Method | str | None = None, *, seed: int = 0, trials: int = 200,
                         tol: float = 1e-8, maxiter: int = 500,
                         strict: bool = False) -> RNormEstimate:
    """Norm of the discrete maximal-regularity operator of ``map`` on ``L^p(0,T; L^p)``.

    Generators without negative type are shifted by ``1 + max(0, abscissa)``
    first; the shift is recorded.  ExactP2 is the largest singular value of the
    weighted block-lower-triangular operator (p = 2 only).  RandomSearch takes
    the largest ratio over ``trials`` band-limited forcings and is a lower bound.
    """
    method = Method(method) if method is not None else (Method.EXACT_P2 if p == 2 else Method.RANDOM_SEARCH)
    if method is Method.EXACT_P2 and p != 2:
        raise ValueError("ExactP2 requires p = 2")
    shift = _auto_shift(map)
    gen = np.asarray(map.matrix) - shift * np.eye(map.dim)
    if np.iscomplexobj(gen):
        raise ValueError("maxreg_norm_estimate expects a real generator")
    op = _ConvolutionOperator(gen, tg, map.weights)
    if method is Method.EXACT_P2:
        rng = np.random.default_rng(seed)
        value, its, ok = _lanczos_norm(op, map.dim, tol, maxiter, rng)
        if strict and not ok:
            raise ConvergenceError(f"Lanczos iteration did not converge in {maxiter} steps")
        return RNormEstimate(method, value, its, ok, shift)
    if trials < 200:
        raise ValueError("random search needs at least 200 trials")
    nodes = map.state_nodes
    best = 0.0
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        f = band_limited_signal(rng, tg, nodes)
        y = op.forward(f)
        ratio = _weighted_bochner(y, tg.weights, map.weights, p) / _weighted_bochner(f, tg.weights, map.weights, p)
        best = max(best, ratio)
    return RNormEstimate(method, best, trials, True, shift, lower_bound=True)


def invariance_estimates(map: LinearMap, ps: Sequence[float] = (1.5, 2.0, 3.0),
                         Ts: Sequence[float] = (0.5, 1.0, 2.0), dt: float = 1 / 128,
                         seed: int = 0) -> tuple[dict, dict]:
    """Norm estimates across ``p`` (RandomSearch, ``T = 1``) and across ``T`` (ExactP2, fixed ``dt``).

    Maximal regularity does not depend on ``p`` or ``T``; the constants may,
    so the spreads are measurements, not checks.
    """
    by_p = {p: maxreg_norm_estimate(map, TimeGrid(1.0, int(round(1 / dt))), p, Method.RANDOM_SEARCH,
                                    seed=seed).value for p in ps}
    by_T = {T: maxreg_norm_estimate(map, TimeGrid(T, int(round(T / dt))), 2.0, Method.EXACT_P2,
                                    seed=seed).value for T in Ts}
    return by_p, by_T


GENERATOR_KINDS = ("free", "closed_loop", "perturbed")


def sweep_generator(kind: str, n: int, b: float = 0.3, c: float = 0.5) -> LinearMap:
    """Generator of the given kind on an ``n``-cell grid.

    ``perturbed`` is the closed-loop generator plus ``P g = b g' + c g`` with
    constant ``b, c``.  A multiple of the identity would be absorbed exactly by
    the stabilizing shift, hence the first-order term.
    """
    sys = assemble_extended(Grid(n))
    if kind == "free":
        return generator_matrix(sys, Boundary.FREE)
    cl = generator_matrix(sys, Boundary.CLOSED_LOOP)
    if kind == "closed_loop":
        return cl
    if kind == "perturbed":
        return add_perturbation(cl, perturbation_matrix(sys.grid, b, c))
    raise ValueError(f"unknown generator kind {kind!r}; expected one of {GENERATOR_KINDS}")


@dataclass(frozen=True)
class SweepResult:
    kind: str
    grids: tuple
    estimates: tuple
    max_variation: float
    passed: bool


def maxreg_stability_sweep(kind: str, grids: Sequence[int], tg: TimeGrid, p: float = 2.0,
                           threshold: float = 0.10, **kwargs) -> SweepResult:
    """One norm estimate per grid; PASS when successive estimates differ by less than ``threshold``."""
    grids = tuple(grids)
    if list(grids) != sorted(set(grids)):
        raise ValueError("grids must be strictly increasing")
    ests = tuple(maxreg_norm_estimate(sweep_generator(kind, n), tg, p, **kwargs) for n in grids)
    vals = np.array([e.value for e in ests])
    var = float(np.max(np.abs(np.diff(vals)) / vals[:-1])) if len(vals) > 1 else 0.0
    ok = var < threshold and all(e.converged for e in ests)
    return SweepResult(kind, grids, ests, var, ok)
