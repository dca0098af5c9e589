import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from awrascle import initial_data as idt
from awrascle.errors import OutsideWindow
from awrascle.pressure import GammaLaw, LogLaw

W = (-5.0, 5.0)
STEP = idt.step(0.0, 1.0, 2.0)


def test_one_sided_evaluation():
    assert idt.eval(STEP, 0.0, "left") == 1.0
    assert idt.eval(STEP, 0.0, "right") == 2.0
    assert idt.eval(idt.neg_tanh(), 0.0) == 0.0
    with pytest.raises(ValueError):
        idt.eval(STEP, 0.0, "middle")


def test_domain_enforced():
    f = idt.PiecewiseLipschitzFn((), (lambda x: np.asarray(x) * 0.0,), domain=(-1.0, 1.0))
    with pytest.raises(OutsideWindow):
        f(2.0)


def test_table_with_jump(tmp_path):
    path = tmp_path / "g0.csv"
    path.write_text("x,g\n-1,1\n0,1\n0,3\n1,3\n")
    f = idt.parse_function("table:g0.csv", tmp_path)
    assert f.jumps == (0.0,)
    assert f.one_sided == ((1.0, 3.0),)
    assert f(-10.0) == 1.0 and f(10.0) == 3.0


@pytest.mark.parametrize("text, x, value", [
    ("expr:const(2.5)", 1.0, 2.5),
    ("expr:linear(-1)", 0.5, -0.5),
    ("expr:neg_tanh()", 1.0, -math.tanh(1.0)),
    ("expr:tanh(2, 1, 0)", 1.0, 2 * math.tanh(1.0)),
    ("expr:gauss_bump(1, 0, 1, 0.5)", 0.0, 1.5),
    ("step:0,1,2", 1.0, 2.0),
])
def test_parse_function(text, x, value):
    assert idt.parse_function(text)(x) == pytest.approx(value)


def test_parse_function_rejects_unknown():
    with pytest.raises(ValueError):
        idt.parse_function("expr:sin()")
    with pytest.raises(ValueError):
        idt.parse_function("step:0,1")


def test_velocity_must_be_lipschitz():
    with pytest.raises(ValueError):
        idt.InitialData(STEP, STEP)


@pytest.mark.parametrize("u0, g0, model, eps, probe, expected", [
    (idt.constant(0.0), idt.constant(1.0), LogLaw(), 0.1, (-1.0, 1.0), (0.0, 0.0)),
    (idt.constant(0.0), STEP, GammaLaw(1.0), 0.1, (-1.0, 1.0), (0.01, 0.02)),
    (idt.linear(-1.0), idt.constant(math.e), LogLaw(), 1.0, (-1.0, 2.0), (2.0, -1.0)),
])
def test_riemann_invariant(u0, g0, model, eps, probe, expected):
    z = idt.riemann_invariant_initial(idt.InitialData(u0, g0), model, eps)
    assert z(np.array(probe)) == pytest.approx(expected, abs=1e-15)
    assert z.jumps == g0.jumps


def test_riemann_invariant_jump_size():
    z = idt.riemann_invariant_initial(idt.InitialData(idt.neg_tanh(), STEP), GammaLaw(2.0), 0.3)
    l, r = z.one_sided[0]
    assert r - l == pytest.approx(0.09 * (4.0 - 1.0), rel=1e-14)


@pytest.mark.parametrize("u0, holds, margin", [
    (idt.neg_tanh(), True, 0.01),
    (idt.constant(0.0), True, 0.01),
    (idt.tanh(), False, 0.01 - math.tanh(5.0)),
])
def test_epsilon_condition(u0, holds, margin):
    (v,) = idt.check_epsilon_condition(idt.InitialData(u0, STEP), GammaLaw(1.0), 0.1, W)
    assert v.jump == 0.0 and v.kind == "eps"
    assert v.holds is holds
    assert v.margin == pytest.approx(margin, abs=1e-12)


@pytest.mark.parametrize("u0, g0, verdict", [
    (idt.neg_tanh(), STEP, True),
    (idt.constant(0.0), STEP, False),
    (idt.neg_tanh(), idt.step(0.0, 2.0, 1.0), None),
])
def test_zero_condition(u0, g0, verdict):
    out = idt.check_zero_condition(idt.InitialData(u0, g0), W)
    if verdict is None:
        assert out == []
    else:
        assert out[0].holds is verdict


AMPS = st.floats(min_value=-2.0, max_value=2.0)
EPS = st.floats(min_value=1e-3, max_value=1.0)


@given(AMPS, EPS, EPS)
def test_epsilon_margin_monotone_in_eps(amp, e1, e2):
    data = idt.InitialData(idt.tanh(amp), STEP)
    lo, hi = sorted((e1, e2))
    m_lo = idt.check_epsilon_condition(data, GammaLaw(2.0), lo, W, 512)[0].margin
    m_hi = idt.check_epsilon_condition(data, GammaLaw(2.0), hi, W, 512)[0].margin
    assert m_lo <= m_hi + 1e-15


@given(AMPS, EPS)
def test_zero_condition_implies_epsilon_condition(amp, eps):
    data = idt.InitialData(idt.tanh(amp), STEP)
    z = idt.check_zero_condition(data, W, 512)[0]
    e = idt.check_epsilon_condition(data, GammaLaw(1.0), eps, W, 512)[0]
    if z.holds:
        assert e.holds


@pytest.mark.parametrize("u0, g0, model, expected", [
    (idt.constant(0.0), idt.constant(1.0), LogLaw(), (1.0, 1.0, 0.0)),
    (idt.linear(-1.0), idt.constant(2.0), LogLaw(), (2.0, 2.0, 0.0)),
    (idt.linear(1.0), idt.constant(1.0), LogLaw(), (1.0, 1.0, 1.0)),
])
def test_bound_constants(u0, g0, model, expected):
    got = idt.bound_constants(idt.InitialData(u0, g0), model, 0.1, W)
    assert got == pytest.approx(expected, abs=1e-9)


def test_bound_constants_use_one_sided_values():
    a1, a2, _ = idt.bound_constants(idt.InitialData(idt.neg_tanh(), STEP), LogLaw(), 0.1, W)
    assert (a1, a2) == (1.0, 2.0)


@pytest.mark.parametrize("f, window, expected, tol", [
    (idt.linear(-1.0), (-1.0, 1.0), 1.0, 1e-12),
    (idt.neg_tanh(), W, 1.0, 1e-3),
    (STEP, (-1.0, 1.0), 0.0, 0.0),
])
def test_lipschitz_constant(f, window, expected, tol):
    assert idt.lipschitz_constant(f, window) == pytest.approx(expected, abs=tol)
