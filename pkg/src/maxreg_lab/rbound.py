"""Randomized R-bound estimates, sector and admissibility suprema, Dirichlet
growth rates and feedback bounds."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import FeedbackSingularError, NearSpectrumError
from .grid import TimeSignal, bochner_norm, lp_norm, weighted_lp
from .operators import (
    Boundary,
    ExtendedSystem,
    LinearMap,
    dirichlet_map,
    feedback_factor,
    generator_matrix,
    operator_norm,
    resolvent_full,
    resolvent_state,
    spectral_abscissa,
)
from .semigroup import mild_solution

RADEMACHER_DRAWS = 64
FIELD_MODES = 10


@dataclass(frozen=True, eq=False)
class OperatorFamily:
    """Finite family of matrices sharing input and output spaces.

    ``w_in``/``w_out`` are the quadrature weights of the discrete L2 norms;
    ``nodes_in`` locates input coordinates on [0, 1] (None for scalar inputs).
    """

    label: str
    members: tuple
    params: tuple
    w_in: np.ndarray
    w_out: np.ndarray
    nodes_in: np.ndarray | None = None
    exponent: float | None = None

    def __post_init__(self):
        if not self.members:
            raise ValueError("operator family is empty")
        shape = np.shape(self.members[0])
        for M in self.members:
            if np.shape(M) != shape:
                raise ValueError("family members must share one shape")
        if shape != (len(self.w_out), len(self.w_in)):
            raise ValueError(f"member shape {shape} does not match weights")
        if len(self.params) != len(self.members):
            raise ValueError("one parameter per member required")

    def __len__(self) -> int:
        return len(self.members)

    def scaled(self, c: complex) -> "OperatorFamily":
        return OperatorFamily(f"{c}*{self.label}", tuple(c * M for M in self.members), self.params,
                              self.w_in, self.w_out, self.nodes_in, self.exponent)

    def member_norms(self) -> np.ndarray:
        return np.array([operator_norm(M, self.w_out, self.w_in) for M in self.members])


def map_family(label: str, maps: Sequence[LinearMap], params: Sequence) -> OperatorFamily:
    """Family built from :class:`LinearMap` objects (state coordinates)."""
    first = maps[0]
    return OperatorFamily(label, tuple(np.asarray(m.matrix) for m in maps), tuple(params),
                          first.weights, first.weights, first.state_nodes)


def default_omega(sys: ExtendedSystem) -> float:
    """``1 + max`` of the free and closed-loop spectral abscissas."""
    a = max(spectral_abscissa(generator_matrix(sys, bc)) for bc in Boundary)
    return 1.0 + max(0.0, a)


def _axis_points(s: np.ndarray, omega: float, axis: str) -> np.ndarray:
    if axis == "imaginary":
        return omega + 1j * s
    if axis == "real":
        if np.any(s <= 0):
            raise ValueError("real-axis families need s > 0")
        return s + omega
    raise ValueError(f"axis must be 'imaginary' or 'real', got {axis!r}")


def resolvent_family(map: LinearMap, s: Sequence[float], omega: float = 0.0) -> OperatorFamily:
    """``{s R(omega + i s, map)}``."""
    s = np.asarray(s, dtype=float)
    members = tuple(sk * resolvent_state(map, omega + 1j * sk) for sk in s)
    return OperatorFamily(f"sR(w+is,{map.label})", members, tuple(s), map.weights, map.weights,
                          map.state_nodes, 1.0)


def dirichlet_family(sys: ExtendedSystem, s: Sequence[float], p: float = 2.0, omega: float | None = None,
                     axis: str = "imaginary") -> OperatorFamily:
    """``{|s|^{1/p} D_lam}`` with ``lam = omega + i s`` or ``lam = s + omega``.

    Members map a scalar boundary input to a grid function.
    """
    omega = default_omega(sys) if omega is None else omega
    s = np.asarray(s, dtype=float)
    lams = _axis_points(s, omega, axis)
    members = tuple(abs(sk) ** (1 / p) * dirichlet_map(sys, lam).profile.values[:, None]
                    for sk, lam in zip(s, lams))
    return OperatorFamily(f"s^(1/{p:g})D[{axis}]", members, tuple(s), np.ones(1), sys.grid.weights,
                          None, 1 / p)


def observation_family(sys: ExtendedSystem, s: Sequence[float], p: float = 2.0, omega: float | None = None,
                       axis: str = "imaginary") -> OperatorFamily:
    """``{|s|^{1/q} K R(lam, A)}`` for the free generator, ``q = p/(p-1)``."""
    omega = default_omega(sys) if omega is None else omega
    q = _conjugate(p)
    s = np.asarray(s, dtype=float)
    free = generator_matrix(sys, Boundary.FREE)
    k = sys.k_row.weights
    members = tuple(abs(sk) ** (1 / q) * (k @ resolvent_full(free, lam))[None, :]
                    for sk, lam in zip(s, _axis_points(s, omega, axis)))
    return OperatorFamily(f"s^(1/{q:g})KR[{axis}]", members, tuple(s), sys.grid.weights, np.ones(1),
                          sys.grid.nodes, 1 / q)


def _conjugate(p: float) -> float:
    if p <= 1:
        raise ValueError(f"need p > 1, got {p}")
    return np.inf if np.isinf(p) else p / (p - 1)


@dataclass(frozen=True)
class RBoundReport:
    label: str
    trials: int
    ratios: np.ndarray
    seed: int
    singleton: float
    redraws: int = 0

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())

    @property
    def p95(self) -> float:
        return float(np.percentile(self.ratios, 95))

    @property
    def estimate(self) -> float:
        """Lower-bound proxy for the R-bound: random ratios and the largest member norm."""
        return max(self.max_ratio, self.singleton)


def random_field(rng: np.random.Generator, nodes: np.ndarray | None, modes: int = FIELD_MODES) -> np.ndarray:
    """Gaussian combination of the first cosine modes (a scalar when ``nodes`` is None)."""
    if nodes is None:
        return rng.standard_normal(1)
    c = rng.standard_normal(modes)
    return np.cos(np.pi * np.outer(nodes, np.arange(modes))) @ c


def _rademacher_mean(vectors: np.ndarray, signs: np.ndarray, w: np.ndarray) -> float:
    sums = signs @ vectors
    return float(np.mean(weighted_lp(sums, w, 2.0, axis=1)))


def rbound_estimate(fam: OperatorFamily, k: int = 8, trials: int = 100, seed: int = 0) -> RBoundReport:
    """Monte Carlo Rademacher ratios for ``k``-subsets of ``fam``.

    Each trial draws ``k`` distinct members, ``k`` band-limited inputs and
    averages both sides over 64 sign vectors.  Seeds are derived from
    ``(seed, trial)`` so the ratio list does not depend on evaluation order.
    """
    k = min(k, len(fam))
    if k < 1:
        raise ValueError("subset size must be positive")
    if trials < 100:
        raise ValueError("at least 100 trials required")
    ratios = np.empty(trials)
    redraws = 0
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        idx = rng.choice(len(fam), size=k, replace=False)
        signs = rng.choice([-1.0, 1.0], size=(RADEMACHER_DRAWS, k))
        while True:
            x = np.array([random_field(rng, fam.nodes_in) for _ in range(k)])
            den = _rademacher_mean(x, signs, fam.w_in)
            if den > 1e-12:
                break
            redraws += 1
        y = np.array([fam.members[j] @ x[i] for i, j in enumerate(idx)])
        ratios[trial] = _rademacher_mean(y, signs, fam.w_out) / den
    return RBoundReport(fam.label, trials, ratios, seed, float(fam.member_norms().max()), redraws)


@dataclass(frozen=True, eq=False)
class SectorReport:
    tag: str
    samples: np.ndarray
    values: np.ndarray
    exponent: float | None = None
    skipped: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def sup(self) -> float:
        return float(np.max(self.values)) if len(self.values) else float("nan")


def half_plane_samples(beta: float = 0.0, radii: Sequence[float] | None = None, angles: int = 11) -> np.ndarray:
    """Log-radial grid ``beta + r e^{i theta}``, ``|theta| <= pi/2`` (220 points by default)."""
    r = np.logspace(-2, 4, 20) if radii is None else np.asarray(radii, dtype=float)
    theta = np.linspace(-np.pi / 2, np.pi / 2, angles)
    return (beta + np.outer(r, np.exp(1j * theta))).ravel()


def sector_sup(map: LinearMap, beta: float = 0.0, samples: Sequence[complex] | None = None) -> SectorReport:
    """``sup |lam - beta| ||R(lam, map)||`` over samples in ``Re lam >= beta``."""
    lams = half_plane_samples(beta) if samples is None else np.asarray(samples, dtype=complex)
    kept, vals, skipped = [], [], []
    for lam in lams:
        try:
            R = resolvent_state(map, lam)
        except NearSpectrumError:
            skipped.append(lam)
            continue
        kept.append(lam)
        vals.append(abs(lam - beta) * operator_norm(R, map.weights, map.weights))
    return SectorReport("M1", np.array(kept), np.array(vals), skipped=tuple(skipped))


def _dual_norm(row: np.ndarray, w: np.ndarray, q: float) -> float:
    """L^q norm of the density representing ``g -> row @ g`` under quadrature ``w``."""
    return float(weighted_lp(row / w, w, q))


def admissibility_sup(sys: ExtendedSystem, p: float = 2.0, samples: Sequence[complex] | None = None,
                      omega: float | None = None) -> tuple[SectorReport, SectorReport]:
    """``(M2, M3)``: ``sup |z|^{1/q} ||K R(z+omega, A)||`` and ``sup |z|^{1/p} ||D_{z+omega}||_p``.

    Samples ``z`` lie in the closed right half-plane; the operators are the
    free ones shifted by ``omega`` (default :func:`default_omega`).
    """
    omega = default_omega(sys) if omega is None else omega
    q = _conjugate(p)
    zs = half_plane_samples(0.0) if samples is None else np.asarray(samples, dtype=complex)
    free = generator_matrix(sys, Boundary.FREE)
    w = sys.grid.weights
    k = sys.k_row.weights
    m2, m3, kept, skipped = [], [], [], []
    for z in zs:
        try:
            R = resolvent_full(free, z + omega)
            D = dirichlet_map(sys, z + omega).profile
        except NearSpectrumError:
            skipped.append(z)
            continue
        kept.append(z)
        m2.append(abs(z) ** (1 / q) * _dual_norm(k @ R, w, q))
        m3.append(abs(z) ** (1 / p) * lp_norm(D, p))
    kept = np.array(kept)
    extra = {"omega": omega, "p": p}
    return (SectorReport("M2", kept, np.array(m2), skipped=tuple(skipped), extra=extra),
            SectorReport("M3", kept, np.array(m3), skipped=tuple(skipped), extra=extra))


def observation_tail(sys: ExtendedSystem, lams: Sequence[float], p: float = 2.0) -> np.ndarray:
    """``lam^{1/q} ||K R(lam, A)||`` on real ``lam`` (no shift)."""
    q = _conjugate(p)
    free = generator_matrix(sys, Boundary.FREE)
    w = sys.grid.weights
    return np.array([lam ** (1 / q) * _dual_norm(sys.k_row.weights @ resolvent_full(free, lam), w, q)
                     for lam in lams])


def _slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def kappa_growth(sys: ExtendedSystem, p: float = 2.0, lams: Sequence[float] | None = None) -> SectorReport:
    """Growth of ``lam ||D_lam||_p`` on real ``lam``.

    ``exponent`` is the log-log slope of ``lam ||D_lam||``; ``extra`` holds the
    slope of ``||D_lam||`` and ``sup lam^{(p+1)/(2p)} ||D_lam||``.  Large
    ``lam`` needs boundary layers of width ``lam^{-1/2}`` resolved by the grid.
    """
    lams = np.logspace(1, 6, 21) if lams is None else np.asarray(lams, dtype=float)
    if np.any(lams <= 1) or np.any(lams > 1e6):
        raise ValueError("lambda samples must lie in (1, 1e6]")
    norms = np.array([lp_norm(dirichlet_map(sys, lam).profile, p) for lam in lams])
    scaled = lams ** ((p + 1) / (2 * p)) * norms
    extra = {"slope_D": _slope(lams, norms), "sup_scaled": float(scaled.max()), "scaled": scaled, "p": p}
    return SectorReport("kappa", lams, lams * norms, exponent=_slope(lams, lams * norms), extra=extra)


def feedback_sup(sys: ExtendedSystem, alpha: float = 1.0, samples: Sequence[complex] | None = None) -> SectorReport:
    """``nu = sup |1 - K D_lam|^{-1}`` over samples in ``Re lam >= alpha``."""
    lams = half_plane_samples(alpha) if samples is None else np.asarray(samples, dtype=complex)
    kept, vals, skipped = [], [], []
    for lam in lams:
        try:
            gap = feedback_factor(sys, lam)
        except (NearSpectrumError, FeedbackSingularError):
            skipped.append(lam)
            continue
        kept.append(lam)
        vals.append(1.0 / abs(gap))
    return SectorReport("nu", np.array(kept), np.array(vals), skipped=tuple(skipped))


@dataclass(frozen=True)
class YosidaTerms:
    n: float
    norms: tuple
    direct: float
    residual: float
    forcing: float

    @property
    def total(self) -> float:
        return float(sum(self.norms))


def yosida_term_norms(sys: ExtendedSystem, n: float, f: TimeSignal, p: float = 2.0) -> YosidaTerms:
    """Bochner norms of the four pieces of ``A_n z``, ``z = int T_cl(t-s) f(s) ds``.

    With ``v`` the free convolution and ``w = z - v`` the boundary-driven part,
    the pieces are ``nAR(n,A)v``, ``n^2 D_n (1-KD_n)^{-1} K R(n,A) v`` and the
    same two operators applied to ``w``.  ``residual`` is the norm of their sum
    minus ``A_n z`` computed from the closed-loop resolvent.
    """
    size = sys.grid.size
    free = generator_matrix(sys, Boundary.FREE)
    cl = generator_matrix(sys, Boundary.CLOSED_LOOP)
    D = dirichlet_map(sys, n)
    gap = feedback_factor(sys, n, D)
    Rf = resolvent_full(free, n)
    smooth = n * n * Rf - n * np.eye(size)
    boundary = n * n * np.outer(D.profile.values, sys.k_row.weights @ Rf) / gap
    v = mild_solution(free, f)
    z = mild_solution(cl, f)
    w = z - v
    tg, grid = f.timegrid, f.grid

    def sig(M, x):
        return TimeSignal(tg, grid, x.values @ M.T)

    terms = [sig(smooth, v), sig(boundary, v), sig(smooth, w), sig(boundary, w)]
    yosida = n * n * resolvent_full(cl, n) - n * np.eye(size)
    direct = sig(yosida, z)
    total = terms[0] + terms[1] + terms[2] + terms[3]
    return YosidaTerms(n, tuple(bochner_norm(t, p) for t in terms), bochner_norm(direct, p),
                       bochner_norm(total - direct, p), bochner_norm(f, p))
