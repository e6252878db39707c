"""Non-autonomous problems ``z' = a(t) G z + f`` with a scalar coefficient profile."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import UnstableGeneratorError
from .grid import GridFunction, TimeSignal, bochner_norm, time_derivative
from .maxreg import MaxRegReport
from .operators import (
    Boundary,
    ExtendedSystem,
    LinearMap,
    dirichlet_map,
    generator_matrix,
    operator_norm,
    spectral_abscissa,
)
from .semigroup import _stability_tol, exp_and_phi1

PROFILE_SAMPLES = 1001
MODAL_COND_LIMIT = 1e6


@dataclass(frozen=True, eq=False)
class CoefficientProfile:
    """Scalar coefficient ``a(t) >= alpha > 0`` on ``[0, T]``.

    ``func`` must be vectorized.  Positivity is checked on a fine sample, and
    ``modulus`` records the largest increment between neighbouring samples.
    """

    func: Callable[[np.ndarray], np.ndarray]
    T: float = 1.0
    alpha: float | None = None
    label: str = "a"

    def __post_init__(self):
        t = np.linspace(0.0, self.T, PROFILE_SAMPLES)
        a = np.broadcast_to(np.asarray(self.func(t), dtype=float), t.shape)
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficient profile has non-finite samples")
        lower = float(a.min())
        alpha = lower if self.alpha is None else self.alpha
        if alpha <= 0 or lower < alpha:
            raise ValueError(f"coefficient profile must satisfy a(t) >= alpha > 0 (min {lower:.6g}, alpha {alpha})")
        object.__setattr__(self, "alpha", alpha)

    def __call__(self, t):
        return np.broadcast_to(np.asarray(self.func(np.asarray(t, dtype=float)), dtype=float), np.shape(t))

    @property
    def modulus(self) -> float:
        t = np.linspace(0.0, self.T, PROFILE_SAMPLES)
        return float(np.max(np.abs(np.diff(self(t)))))

    @classmethod
    def constant(cls, c: float, T: float = 1.0) -> "CoefficientProfile":
        return cls(lambda t: np.full(np.shape(t), float(c)), T, label=f"{c:g}")

    @classmethod
    def linear(cls, a0: float = 1.0, slope: float = 0.5, T: float = 1.0) -> "CoefficientProfile":
        return cls(lambda t: a0 + slope * t, T, label=f"{a0:g}+{slope:g}t")


def _generator(sys: ExtendedSystem, bc: Boundary) -> LinearMap:
    return generator_matrix(sys, bc)


def _phi1(x: np.ndarray) -> np.ndarray:
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + 0.5 * x, np.expm1(safe) / safe)


def _step_modal(G, amid, dt, shift, z0, fbar):
    """Stepping in eigen-coordinates; all ``a G`` share eigenvectors.

    Returns None when the eigenvector basis is too ill-conditioned.
    """
    w, V = np.linalg.eig(G)
    if np.linalg.cond(V) > MODAL_COND_LIMIT:
        return None
    Vinv = np.linalg.inv(V)
    x = dt * (amid[:, None] * w[None, :] - shift)
    E, F = np.exp(x), dt * _phi1(x)
    g = fbar @ Vinv.T
    zeta = np.empty((len(amid) + 1, len(w)), dtype=complex)
    zeta[0] = Vinv @ z0
    for k in range(len(amid)):
        zeta[k + 1] = E[k] * zeta[k] + F[k] * g[k]
    z = zeta @ V.T
    if not (np.iscomplexobj(G) or np.iscomplexobj(fbar) or np.iscomplexobj(z0)):
        z = z.real
    return z


def _step_dense(G, amid, dt, shift, z0, fbar):
    eye = np.eye(len(G))
    z = np.zeros((len(amid) + 1, len(G)), dtype=np.result_type(G, fbar, z0))
    z[0] = z0
    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    for k, a in enumerate(amid):
        a = float(a)
        if a not in cache:
            cache[a] = exp_and_phi1(a * G - shift * eye, dt)
        E, F = cache[a]
        z[k + 1] = E @ z[k] + F @ fbar[k]
    return z


def nonauto_solve(sys: ExtendedSystem, prof: CoefficientProfile, f: TimeSignal,
                  x0: GridFunction | None = None, bc: Boundary = Boundary.CLOSED_LOOP,
                  shift: float = 0.0) -> TimeSignal:
    """Exponential midpoint stepping for ``z' = a(t) G z + f``.

    Step ``k`` uses the frozen generator ``a(t_k + dt/2) G`` and the forcing
    average ``(f_k + f_{k+1})/2``.  A nonzero ``shift`` integrates
    ``e^{-shift t} z`` as in :func:`mild_solution`.
    """
    tg = f.timegrid
    if tg.T > prof.T * (1 + 1e-12):
        raise ValueError("time grid extends past the coefficient profile")
    gen = _generator(sys, bc)
    G = np.asarray(gen.matrix)
    amid = prof(tg.times[:-1] + 0.5 * tg.dt)
    worst = max(spectral_abscissa(gen) * a for a in (amid.min(), amid.max())) - shift
    if worst > _stability_tol(amid.max() * G):
        raise UnstableGeneratorError(f"a(t) G has spectral abscissa {worst + shift:.6g}; pass a shift")
    t = tg.times
    fs = gen.restrict(f.values)
    if shift:
        fs = np.exp(-shift * t)[:, None] * fs
    fbar = 0.5 * (fs[:-1] + fs[1:])
    z0 = np.zeros(gen.dim) if x0 is None else gen.restrict(x0.values)
    z = _step_modal(G, amid, tg.dt, shift, z0, fbar)
    if z is None:
        z = _step_dense(G, amid, tg.dt, shift, z0, fbar)
    if shift:
        z = np.exp(shift * t)[:, None] * z
    return TimeSignal(tg, f.grid, gen.expand(z))


def nonauto_maxreg_report(sys: ExtendedSystem, prof: CoefficientProfile, f: TimeSignal, p: float = 2.0,
                          bc: Boundary = Boundary.CLOSED_LOOP) -> MaxRegReport:
    """Maximal-regularity norms for ``z' = a(t) G z + f``, ``z(0) = 0``."""
    fn = bochner_norm(f, p)
    if fn == 0.0:
        raise ValueError("maximal-regularity ratio needs nonzero forcing")
    gen = _generator(sys, bc)
    z = nonauto_solve(sys, prof, f, bc=bc)
    a = prof(f.timegrid.times)
    gz_state = gen.restrict(z.values) @ np.asarray(gen.matrix).T
    gz = TimeSignal(f.timegrid, f.grid, a[:, None] * gen.expand(gz_state))
    dz = time_derivative(z)
    res = bochner_norm(dz - gz - f, p)
    return MaxRegReport(p, f.timegrid.T, bochner_norm(dz, p), bochner_norm(z, p), bochner_norm(gz, p),
                        fn, res, f"{prof.label}*{gen.label}")


def _interior_second_difference(sys: ExtendedSystem) -> np.ndarray:
    """Interior rows of the maximal operator as an (n-1) x (n+1) matrix."""
    return sys.interior_apply(np.eye(sys.grid.size)).T


def nonauto_identity_residual(sys: ExtendedSystem, prof: CoefficientProfile, mu0: float, t: float,
                              matched: bool = True) -> float:
    """Operator-norm defect of ``a G_cl - mu0 = (a A - mu0)(I - D K)`` at ``a = a(t)``.

    Both sides act on interior states of closed-loop grid functions.  With
    ``matched`` the Dirichlet profile solves ``(mu0 - a A_m) g = 0``, i.e. it is
    ``D_{mu0/a}``; otherwise the fixed profile ``D_{mu0}`` is used.
    """
    a = float(prof(t))
    cl = generator_matrix(sys, Boundary.CLOSED_LOOP)
    size = sys.grid.size
    lhs = a * np.asarray(cl.matrix) - mu0 * np.eye(cl.dim)
    D = dirichlet_map(sys, mu0 / a if matched else mu0).profile.values
    restrict = np.eye(size)[1:-1]
    proj = np.eye(size) - np.outer(D, sys.k_row.weights)
    rhs = (a * _interior_second_difference(sys) - mu0 * restrict) @ proj @ cl.lift
    return operator_norm(lhs - rhs, cl.weights, cl.weights)


def _graph_operator_norm(M: np.ndarray, base: np.ndarray, mu0: float, w: np.ndarray) -> float:
    """``sup ||M x|| / ||(mu0 - base) x||``."""
    T = M @ np.linalg.inv(mu0 * np.eye(len(base)) - base)
    return operator_norm(T, w, w)


def continuity_bound_check(sys: ExtendedSystem, prof: CoefficientProfile, t: float, s: float,
                           mu0: float = 1.0) -> tuple[float, float]:
    """``(||G_cl(t) - G_cl(s)||, ||A(t) - A(s)||)`` from the graph norms at time 0.

    ``G(t) = a(t) G`` and the graph norm of ``G(0)`` is ``||(mu0 - G(0)) x||``.
    The closed-loop value is expected not to exceed the free one.
    """
    diff = float(prof(t) - prof(s))
    a0 = float(prof(0.0))
    vals = []
    for bc in (Boundary.CLOSED_LOOP, Boundary.FREE):
        gen = generator_matrix(sys, bc)
        G = np.asarray(gen.matrix)
        vals.append(abs(diff) * _graph_operator_norm(G, a0 * G, mu0, gen.weights))
    return vals[0], vals[1]


def graph_norm_equivalence(sys: ExtendedSystem, prof: CoefficientProfile, ts: Sequence[float],
                           mu0: float = 1.0, bc: Boundary = Boundary.CLOSED_LOOP) -> float:
    """Largest equivalence constant between the graph norms of ``a(t) G`` and ``a(0) G``.

    For each ``t`` both ``||(mu0 - G(t)) (mu0 - G(0))^{-1}||`` and its inverse
    counterpart are measured; the maximum over ``ts`` is returned.
    """
    gen = generator_matrix(sys, bc)
    G = np.asarray(gen.matrix)
    eye = np.eye(gen.dim)
    base = mu0 * eye - float(prof(0.0)) * G
    base_inv = np.linalg.inv(base)
    worst = 1.0
    for t in ts:
        cur = mu0 * eye - float(prof(t)) * G
        up = operator_norm(cur @ base_inv, gen.weights, gen.weights)
        down = operator_norm(base @ np.linalg.inv(cur), gen.weights, gen.weights)
        worst = max(worst, up, down)
    return worst
