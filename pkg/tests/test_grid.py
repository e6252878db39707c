import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxreg_lab.grid import (
    Grid, GridFunction, TimeGrid, TimeSignal, bochner_norm, lp_norm, make_grid, time_derivative, weighted_lp,
)


def test_grid_nodes_and_weights():
    g = Grid(8)
    assert g.h == 0.125
    assert g.size == 9
    np.testing.assert_allclose(g.nodes, np.arange(9) / 8)
    assert g.weights.sum() == pytest.approx(1.0)
    assert g.weights[0] == g.weights[-1] == 0.0625


@pytest.mark.parametrize("n", [0, 4, 7])
def test_coarse_grid_rejected(n):
    with pytest.raises(ValueError, match="too coarse"):
        Grid(n)


def test_make_grid_rejects_fraction():
    with pytest.raises(ValueError):
        make_grid(8.5)


def test_gridfunction_validation():
    g = Grid(8)
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(8))
    with pytest.raises(ValueError):
        GridFunction(g, np.full(9, np.nan))
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(9)) + GridFunction(Grid(16), np.zeros(17))


def test_gridfunction_is_frozen():
    f = Grid(8).zeros()
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_lp_norm_of_constant_and_linear():
    g = Grid(64)
    assert lp_norm(g.sample(lambda s: np.ones_like(s)), 3) == pytest.approx(1.0)
    # trapezoid on s^2 over [0,1]: 1/3 + h^2/6
    assert lp_norm(g.sample(lambda s: s), 2) ** 2 == pytest.approx(1 / 3 + g.h**2 / 6, rel=1e-12)
    assert lp_norm(g.sample(lambda s: -2 * s), np.inf) == pytest.approx(2.0)


def test_lp_norm_rejects_small_p():
    with pytest.raises(ValueError):
        lp_norm(Grid(8).zeros(), 0.5)


def test_second_order_quadrature():
    errs = []
    for n in (32, 64):
        g = Grid(n)
        errs.append(abs(lp_norm(g.sample(np.sin), 2) ** 2 - (0.5 - np.sin(2) / 4)))
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_time_grid():
    tg = TimeGrid(2.0, 8)
    assert tg.dt == 0.25
    assert tg.weights.sum() == pytest.approx(2.0)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 8)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 4)


def test_timesignal_shape_checked():
    with pytest.raises(ValueError):
        TimeSignal(TimeGrid(1.0, 8), Grid(8), np.zeros((8, 9)))


def test_bochner_norm_separable():
    tg, g = TimeGrid(1.0, 400), Grid(200)
    sig = TimeSignal.from_function(tg, g, lambda t, s: np.exp(-t) * np.cos(np.pi * s))
    exact = np.sqrt((1 - np.exp(-2)) / 2 * 0.5)
    assert bochner_norm(sig, 2) == pytest.approx(exact, rel=1e-4)


def test_time_derivative_exact_on_quadratics():
    tg, g = TimeGrid(1.0, 16), Grid(8)
    sig = TimeSignal.from_function(tg, g, lambda t, s: 3 * t**2 - t + s)
    d = time_derivative(sig)
    expect = 6 * tg.times[:, None] - 1 + 0 * g.nodes[None, :]
    np.testing.assert_allclose(d.values.real, expect, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=9, max_size=9), st.lists(st.floats(-10, 10), min_size=9, max_size=9),
       st.floats(1, 6), st.floats(-5, 5))
def test_norm_axioms(a, b, p, c):
    g = Grid(8)
    fa, fb = GridFunction(g, a), GridFunction(g, b)
    assert lp_norm(fa + fb, p) <= lp_norm(fa, p) + lp_norm(fb, p) + 1e-9
    assert lp_norm(c * fa, p) == pytest.approx(abs(c) * lp_norm(fa, p), rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1, 8))
def test_weighted_lp_monotone_in_p_for_probability_weights(p):
    w = Grid(16).weights
    v = np.linspace(-1, 2, 17)
    assert weighted_lp(v, w, p) <= weighted_lp(v, w, p + 0.5) + 1e-12


def test_fine_grid_step():
    assert make_grid(128).h == 0.0078125


def test_zero_and_unit_norms():
    g, tg = Grid(16), TimeGrid(1.0, 16)
    assert lp_norm(g.zeros(), 2) == 0.0
    assert bochner_norm(TimeSignal.zeros(tg, g), 2) == 0.0
    assert bochner_norm(TimeSignal.constant(tg, g.sample(np.ones_like)), 2) == pytest.approx(1.0)


def test_bochner_of_linear_ramp():
    tg, g = TimeGrid(1.0, 256), Grid(8)
    sig = TimeSignal.from_function(tg, g, lambda t, s: t + 0 * s)
    assert bochner_norm(sig, 2) == pytest.approx(1 / np.sqrt(3), rel=1e-4)


def test_time_derivative_examples():
    tg, g = TimeGrid(1.0, 64), Grid(8)
    base = g.sample(lambda s: 1 + s)
    const = TimeSignal.constant(tg, base)
    assert np.max(np.abs(time_derivative(const).values)) <= 1e-12
    lin = TimeSignal.from_function(tg, g, lambda t, s: t * (1 + s))
    np.testing.assert_allclose(time_derivative(lin).values.real, np.broadcast_to(base.values.real, (65, 9)), atol=1e-12)
    quad = TimeSignal.from_function(tg, g, lambda t, s: t**2 * (1 + s))
    np.testing.assert_allclose(time_derivative(quad).frame(32).values.real, base.values.real, atol=1e-10)
