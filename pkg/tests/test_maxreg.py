import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxreg_lab.errors import ConvergenceError
from maxreg_lab.experiments import root_nu
from maxreg_lab.grid import Grid, TimeGrid, TimeSignal
from maxreg_lab.maxreg import (
    GENERATOR_KINDS, Method, _ConvolutionOperator, invariance_estimates, maxreg_norm_estimate, maxreg_report, maxreg_stability_sweep,
    sweep_generator,
)
from maxreg_lab.operators import Boundary, LinearMap, assemble_extended, generator_matrix

# scalar z' = -z + 1 on [0, 1]: ||e^{-t}||_2 + 2 ||1 - e^{-t}||_2
SCALAR_RATIO = 1.4774984896181905532
# top singular value of f -> int_0^t e^{-(t-r)} f(r) dr on L2(0, 1): 1/sqrt(1 + th^2), tan th = -th
VOLTERRA_NORM = 0.44212059295499839134

G8 = Grid(8)
MINUS_ONE = LinearMap(G8, -np.eye(G8.size), label="-I")


def test_scalar_report_matches_closed_form():
    tg = TimeGrid(1.0, 256)
    rep = maxreg_report(MINUS_ONE, TimeSignal.constant(tg, G8.sample(np.ones_like)))
    assert rep.ratio == pytest.approx(SCALAR_RATIO, rel=1e-4)
    assert rep.residual < 1e-4
    assert rep.generator == "-I"


def test_report_rejects_zero_forcing():
    with pytest.raises(ValueError):
        maxreg_report(MINUS_ONE, TimeSignal.zeros(TimeGrid(1.0, 8), G8))


def test_report_on_free_generator_is_finite():
    sys = assemble_extended(Grid(32))
    tg = TimeGrid(1.0, 64)
    f = TimeSignal.from_function(tg, sys.grid, lambda t, s: np.cos(2 * np.pi * s) * np.sin(np.pi * t))
    rep = maxreg_report(generator_matrix(sys, Boundary.FREE), f)
    assert 0 < rep.ratio < 10
    assert rep.residual < 1e-2 * rep.f


def test_exact_norm_of_scalar_volterra():
    est = maxreg_norm_estimate(MINUS_ONE, TimeGrid(1.0, 256))
    assert est.method is Method.EXACT_P2 and est.converged and est.shift == 0.0
    assert est.value == pytest.approx(VOLTERRA_NORM, rel=1e-4)


def test_adjoint_dot_product(rng):
    sys = assemble_extended(Grid(16))
    cl = generator_matrix(sys, Boundary.CLOSED_LOOP)
    tg = TimeGrid(1.0, 16)
    op = _ConvolutionOperator(np.asarray(cl.matrix) - np.eye(cl.dim), tg, cl.weights)
    x = rng.standard_normal((tg.m + 1, cl.dim))
    y = rng.standard_normal((tg.m + 1, cl.dim))
    assert np.sum(op.forward(x) * y) == pytest.approx(np.sum(x * op.adjoint(y)), rel=1e-12)
    assert np.sum(op.scaled(x) * y) == pytest.approx(np.sum(x * op.scaled_adjoint(y)), rel=1e-12)


def test_free_generator_norm_near_one():
    est = maxreg_norm_estimate(sweep_generator("free", 32), TimeGrid(1.0, 128))
    assert est.shift == pytest.approx(1.0)
    assert 0.95 < est.value <= 1.0 + 1e-9


def test_method_validation():
    tg = TimeGrid(1.0, 16)
    with pytest.raises(ValueError):
        maxreg_norm_estimate(MINUS_ONE, tg, p=3.0, method="ExactP2")
    with pytest.raises(ValueError):
        maxreg_norm_estimate(MINUS_ONE, tg, method="RandomSearch", trials=50)
    with pytest.raises(ValueError):
        maxreg_norm_estimate(MINUS_ONE, tg, method="Bogus")
    assert maxreg_norm_estimate(MINUS_ONE, tg, p=3.0).method is Method.RANDOM_SEARCH


def test_strict_convergence_failure():
    with pytest.raises(ConvergenceError):
        maxreg_norm_estimate(sweep_generator("closed_loop", 16), TimeGrid(1.0, 32), maxiter=4, strict=True)
    est = maxreg_norm_estimate(sweep_generator("closed_loop", 16), TimeGrid(1.0, 32), maxiter=4)
    assert not est.converged


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(GENERATOR_KINDS))
def test_random_search_is_a_lower_bound(seed, kind):
    gen, tg = sweep_generator(kind, 16), TimeGrid(1.0, 32)
    exact = maxreg_norm_estimate(gen, tg, seed=seed)
    rs = maxreg_norm_estimate(gen, tg, method="RandomSearch", seed=seed)
    assert rs.lower_bound
    assert rs.value <= exact.value + 1e-6


def test_estimates_are_deterministic():
    gen, tg = sweep_generator("perturbed", 16), TimeGrid(1.0, 32)
    a = maxreg_norm_estimate(gen, tg, p=3.0, seed=7)
    b = maxreg_norm_estimate(gen, tg, p=3.0, seed=7)
    assert a == b


def test_sweep_generator_kinds():
    assert sweep_generator("free", 16).label == "free"
    p = sweep_generator("perturbed", 16)
    c = sweep_generator("closed_loop", 16)
    assert not np.allclose(p.matrix, c.matrix)
    with pytest.raises(ValueError):
        sweep_generator("mystery", 16)


def test_sweep_small_grids():
    res = maxreg_stability_sweep("closed_loop", (16, 32), TimeGrid(1.0, 64))
    assert res.passed and res.max_variation < 0.1
    with pytest.raises(ValueError):
        maxreg_stability_sweep("free", (32, 16), TimeGrid(1.0, 64))


def test_invariance_estimates():
    by_p, by_T = invariance_estimates(sweep_generator("closed_loop", 16), ps=(1.5, 2.0), Ts=(0.5, 1.0), dt=1 / 32)
    assert set(by_p) == {1.5, 2.0} and set(by_T) == {0.5, 1.0}
    # RandomSearch is a lower bound for the exact p = 2 value on the same window
    assert by_p[2.0] <= by_T[1.0] + 1e-6
    # the T-window norms are nested: a longer window cannot shrink the norm much
    assert by_T[1.0] >= by_T[0.5] - 1e-3


def test_scalar_multiplier_bound():
    est = maxreg_norm_estimate(MINUS_ONE, TimeGrid(4.0, 256))
    assert est.value <= 1.05


def test_zero_forcing_maps_to_zero():
    op = _ConvolutionOperator(-np.eye(3), TimeGrid(1.0, 8), np.ones(3))
    assert np.all(op.forward(np.zeros((9, 3))) == 0)


def test_report_on_manufactured_closed_loop_solution():
    nu = root_nu()
    errs = []
    for n in (32, 64):
        sys = assemble_extended(Grid(n))
        tg = TimeGrid(1.0, 2 * n)
        f = TimeSignal.from_function(tg, sys.grid, lambda t, s: (np.exp(-t) + nu**2 * (1 - np.exp(-t))) * np.cos(nu * s))
        errs.append(maxreg_report(generator_matrix(sys, Boundary.CLOSED_LOOP), f).residual)
    assert 3 < errs[0] / errs[1] < 5
