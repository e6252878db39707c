"""Matrix semigroups, exponential-integrator mild solutions and Yosida approximants."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, UnstableGeneratorError
from .grid import GridFunction, TimeSignal, lp_norm
from .operators import (
    Boundary,
    ExtendedSystem,
    LinearMap,
    add_perturbation,
    dirichlet_map,
    feedback_factor,
    generator_matrix,
    operator_norm,
    resolvent_full,
    resolvent_state,
    spectral_abscissa,
    stabilizing_shift,
)

EXPM_LIMIT = 1e4
DEFAULT_LAMBDAS = (1.0, 2.0 + 3.0j, 50.0)


def _stability_tol(M: np.ndarray) -> float:
    return 1e-9 * max(1.0, np.linalg.norm(M, 1))


def expm(map: LinearMap, t: float) -> LinearMap:
    """``exp(t map)`` in state coordinates (scaling and squaring with Pade)."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    scale = t * np.linalg.norm(map.matrix, 1)
    if scale > EXPM_LIMIT:
        raise NumericalError(f"t*||map|| = {scale:.3g} exceeds {EXPM_LIMIT:g}; refuse to exponentiate")
    return map.with_matrix(sla.expm(t * np.asarray(map.matrix)), f"exp({t:g} {map.label})")


def exp_and_phi1(M: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """``(exp(dt M), dt phi1(dt M))`` with ``phi1(X) = X^{-1}(e^X - I)``.

    Both blocks come from one exponential of ``[[dt M, dt I], [0, 0]]``, which
    stays exact when ``M`` is singular.
    """
    d = M.shape[0]
    aug = np.zeros((2 * d, 2 * d), dtype=np.result_type(M, float))
    aug[:d, :d] = dt * M
    aug[:d, d:] = dt * np.eye(d)
    E = sla.expm(aug)
    return E[:d, :d], E[:d, d:]


@dataclass(frozen=True, eq=False)
class Propagator:
    """One-step exponential integrator for ``z' = (G - shift) z + f``.

    ``decay_shift`` is the shift ``1 + max(0, abscissa)`` that would give the
    generator negative type; it is reported, the stepping uses ``shift``.
    """

    generator: LinearMap
    dt: float
    shift: float
    decay_shift: float
    step: np.ndarray
    forcing: np.ndarray

    @classmethod
    def build(cls, generator: LinearMap, dt: float, shift: float = 0.0) -> "Propagator":
        M = np.asarray(generator.matrix) - shift * np.eye(generator.dim)
        abscissa = float(np.max(np.linalg.eigvals(M).real))
        if abscissa > _stability_tol(M):
            raise UnstableGeneratorError(
                f"generator '{generator.label}' has spectral abscissa {abscissa + shift:.6g}; pass a shift"
            )
        step, forcing = exp_and_phi1(M, dt)
        return cls(generator, dt, shift, 1.0 + max(0.0, abscissa + shift), step, forcing)


def _step_all(prop: Propagator, z0: np.ndarray, fstates: np.ndarray) -> np.ndarray:
    m = fstates.shape[0] - 1
    dtype = np.result_type(prop.step, fstates, z0)
    z = np.zeros((m + 1, prop.generator.dim), dtype=dtype)
    z[0] = z0
    fbar = 0.5 * (fstates[:-1] + fstates[1:])
    for k in range(m):
        z[k + 1] = prop.step @ z[k] + prop.forcing @ fbar[k]
    return z


def mild_solution(map: LinearMap | Propagator, f: TimeSignal, x0: GridFunction | None = None,
                  shift: float = 0.0) -> TimeSignal:
    """Variation-of-constants solution of ``z' = map z + f``, ``z(0) = x0``.

    Forcing enters through the step average ``(f_k + f_{k+1})/2``.  With a
    nonzero ``shift`` the problem is solved for ``e^{-shift t} z`` and rescaled,
    which lets generators of positive type be integrated explicitly.
    """
    if isinstance(map, Propagator):
        prop = map
        if not np.isclose(prop.dt, f.timegrid.dt):
            raise ValueError("propagator step does not match the time grid")
    else:
        prop = Propagator.build(map, f.timegrid.dt, shift)
    gen = prop.generator
    if f.grid != gen.grid:
        raise ValueError("forcing and generator live on different grids")
    t = f.timegrid.times
    fs = gen.restrict(f.values)
    if prop.shift:
        fs = np.exp(-prop.shift * t)[:, None] * fs
    z0 = np.zeros(gen.dim) if x0 is None else gen.restrict(x0.values)
    z = _step_all(prop, z0, fs)
    if prop.shift:
        z = np.exp(prop.shift * t)[:, None] * z
    return TimeSignal(f.timegrid, f.grid, gen.expand(z))


def apply_frames(map: LinearMap, sig: TimeSignal) -> TimeSignal:
    """Apply ``map`` to every frame of ``sig``."""
    out = map.expand(map.restrict(sig.values) @ np.asarray(map.matrix).T)
    return TimeSignal(sig.timegrid, sig.grid, out)


def yosida_matrix(map: LinearMap, n: float, form: str = "resolvent") -> LinearMap:
    """Yosida approximant ``n^2 R(n, map) - n I`` (or ``n map R(n, map)``)."""
    R = resolvent_state(map, n)
    if form == "resolvent":
        Y = n * n * R - n * np.eye(map.dim)
    elif form == "product":
        Y = n * np.asarray(map.matrix) @ R
    else:
        raise ValueError(f"unknown form {form!r}")
    return map.with_matrix(Y, f"yosida({map.label}, {n:g})")


def yosida_decomposition_residual(sys: ExtendedSystem, n: float) -> float:
    """Norm of ``A_n - [n A R(n,A) + n^2 D_n (1 - K D_n)^{-1} K R(n,A)]``.

    ``A_n`` is the Yosida approximant of the closed-loop generator, all other
    objects are free ones.  Node-to-node matrices, trapezoid-weighted norm.
    """
    D = dirichlet_map(sys, n)
    gap = feedback_factor(sys, n, D)
    size = sys.grid.size
    Rf = resolvent_full(generator_matrix(sys, Boundary.FREE), n)
    Rc = resolvent_full(generator_matrix(sys, Boundary.CLOSED_LOOP), n)
    lhs = n * n * Rc - n * np.eye(size)
    rhs = (n * n * Rf - n * np.eye(size)) + n * n * np.outer(D.profile.values, sys.k_row.weights @ Rf) / gap
    w = sys.grid.weights
    return operator_norm(lhs - rhs, w, w)


def laplace_transform(f: TimeSignal, lam: complex) -> GridFunction:
    """Trapezoid approximation of ``int_0^T e^{-lam t} f(t) dt``."""
    tg = f.timegrid
    kernel = tg.weights * np.exp(-lam * tg.times)
    return GridFunction(f.grid, kernel @ f.values)


def vcf_residual(sys: ExtendedSystem, x0: GridFunction, f: TimeSignal,
                 lams: Sequence[complex] = DEFAULT_LAMBDAS) -> float:
    """Laplace-side check of the variation-of-constants formula around the free semigroup.

    For each sample ``lam`` the closed-loop transform ``z = R(lam, A_cl)(x0 + f^)``
    is inserted into ``z = R(lam, A)(x0 + f^) + D_lam K z``; the largest grid
    L2 defect is returned.
    """
    free = generator_matrix(sys, Boundary.FREE)
    cl = generator_matrix(sys, Boundary.CLOSED_LOOP)
    worst = 0.0
    for lam in lams:
        data = x0 + laplace_transform(f, lam)
        z = resolvent_full(cl, lam) @ data.values
        D = dirichlet_map(sys, lam).profile.values
        rhs = resolvent_full(free, lam) @ data.values + D * (sys.k_row.weights @ z)
        worst = max(worst, lp_norm(GridFunction(sys.grid, z - rhs), 2))
    return worst


def observation_constants(sys: ExtendedSystem, alphas: Sequence[float], dt: float = 1 / 128,
                          bc: Boundary = Boundary.CLOSED_LOOP) -> np.ndarray:
    """``c(alpha)``: norm of ``f -> K (T * f)`` from ``L2(0, alpha; L2)`` to ``L2(0, alpha)``.

    ``T`` is the semigroup of the ``bc`` generator and ``z = T * f`` is stepped
    with the same exponential integrator as :func:`mild_solution`.  Each window
    uses ``round(alpha/dt)`` steps of size ``dt`` and the exact largest singular
    value of the weighted discrete map.
    """
    gen = generator_matrix(sys, bc)
    E, F = exp_and_phi1(np.asarray(gen.matrix), dt)
    k = sys.k_row.weights @ gen.lift
    out = []
    for alpha in alphas:
        m = int(round(alpha / dt))
        if m < 1 or not np.isclose(m * dt, alpha):
            raise ValueError(f"alpha={alpha} is not a multiple of dt={dt}")
        rows = np.empty((m, gen.dim))
        r = k
        for j in range(m):
            rows[j] = r @ F
            r = r @ E
        S = np.zeros((m + 1, m + 1, gen.dim))
        for t in range(1, m + 1):
            S[t, :t] += 0.5 * rows[t - 1::-1]
            S[t, 1:t + 1] += 0.5 * rows[t - 1::-1]
        tau = np.full(m + 1, dt)
        tau[[0, -1]] = dt / 2
        S *= np.sqrt(tau)[:, None, None]
        S /= np.sqrt(np.outer(tau, gen.weights))[None, :, :]
        S = S.reshape(m + 1, -1)
        out.append(float(np.sqrt(np.linalg.eigvalsh(S @ S.T)[-1])))
    return np.array(out)


def perturbed_mild_residual(sys: ExtendedSystem, P: LinearMap, f: TimeSignal,
                            x0: GridFunction | None = None) -> float:
    """Max-in-time grid L2 gap between the ``A_cl + P`` trajectory and
    ``T_cl * (P z + f)`` evaluated on that trajectory."""
    cl = generator_matrix(sys, Boundary.CLOSED_LOOP)
    gen = add_perturbation(cl, P)
    abscissa = spectral_abscissa(gen)
    shift = stabilizing_shift(gen) if abscissa > _stability_tol(gen.matrix) else 0.0
    z = mild_solution(gen, f, x0, shift=shift)
    Pz = TimeSignal(f.timegrid, f.grid, z.values @ np.asarray(P.matrix).T)
    rhs = mild_solution(cl, Pz + f, x0)
    diff = z - rhs
    return max(lp_norm(diff.frame(k), 2) for k in range(f.timegrid.m + 1))
