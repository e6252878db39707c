import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maxreg_lab.example import admissibility_exponents, boundary_adjoint_defect, interpolation_inequality, trace_inequality
from maxreg_lab.grid import Grid
from maxreg_lab.operators import assemble_extended

G = Grid(128)


def test_exponents_at_two():
    ex = admissibility_exponents(2.0)
    assert ex.beta == pytest.approx(0.25)
    assert ex.gamma_range == pytest.approx((1 / 3, 0.5))
    assert ex.r_range[0] == pytest.approx(4 / 3)
    assert ex.beta + ex.gamma < 1
    assert ex.admits(2.0) and not ex.admits(1.2)


@pytest.mark.parametrize("p", [1.0, 3.0, 0.5])
def test_exponents_domain(p):
    with pytest.raises(ValueError):
        admissibility_exponents(p)


def test_exponents_gamma_checked():
    with pytest.raises(ValueError):
        admissibility_exponents(2.0, gamma=0.3)
    assert admissibility_exponents(2.0, gamma=0.45).gamma == 0.45


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6), st.floats(1.2, 2.9))
def test_trace_inequality(coef, p):
    g = G.sample(lambda s: sum(c * np.sin((k + 0.5) * s * 2) for k, c in enumerate(coef)))
    lhs, rhs = trace_inequality(g, p)
    assert lhs <= rhs + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=6, max_size=6), st.floats(1e-3, 1.0), st.floats(1.2, 2.9))
def test_interpolation_inequality(coef, eps, p):
    g = G.sample(lambda s: sum(c * np.cos(k * np.pi * s) + c * s ** k for k, c in enumerate(coef)))
    lhs, rhs = interpolation_inequality(g, eps, p)
    assert lhs <= rhs + 1e-9


def test_interpolation_rejects_eps():
    with pytest.raises(ValueError):
        interpolation_inequality(G.zeros(), 0.0)


def test_boundary_adjoint_second_order():
    d = [boundary_adjoint_defect(assemble_extended(Grid(n)), 1.0, 1) for n in (64, 128)]
    assert d[1] < 1e-3
    assert 3 < d[0] / d[1] < 5
