import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from awrascle import initial_data as idt
from awrascle.characteristics import (Numerics, Scenario, alpha0, alpha_along, blowup_time_for_foot,
                                      bracket_solve, find_feet, find_foot, global_blowup_time,
                                      golden_section, mu_field, riccati_alpha, trace_forward)
from awrascle.errors import BlowupReached, HorizonExceeded, ScenarioRejected
from awrascle.pressure import GammaLaw, LogLaw

from conftest import scenario

ZERO = idt.constant(0.0)
ONE = idt.constant(1.0)


class Box:
    """Minimal state object for bracket_solve."""

    def __init__(self, x):
        self.x = np.array(x, dtype=float)

    def take(self, idx):
        return Box(self.x[idx])

    def put(self, idx, other):
        self.x[idx] = other.x

    def copy(self):
        return Box(self.x.copy())


def test_bracket_solve_cubic_with_expansion():
    target = np.array([-7.0, 0.3, 50.0])

    def f(x, idx):
        return x**3 + x - target[idx], Box(x)

    x, fx, st_ = bracket_solve(f, np.zeros(3), np.full(3, 0.1), 1e-13)
    assert np.all(np.abs(x**3 + x - target) <= 1e-12)
    assert np.allclose(st_.x, x)


def test_golden_section_absolute_tolerance():
    x, fx = golden_section(lambda x: (x - 1e-7) ** 2, -1.0, 1.0, 1e-9)
    assert abs(x - 1e-7) < 1e-8


@pytest.mark.parametrize("model", [LogLaw(), GammaLaw(1.0)])
def test_mu_unit_state(model):
    s = scenario(model, ZERO, ONE)
    assert mu_field(s, 0.5, 0.0) == pytest.approx(-0.01, rel=1e-14)


def test_mu_constant_state_translation_invariant():
    s = scenario(GammaLaw(2.0), idt.constant(0.3), idt.constant(2.0), 0.2)
    ys = np.linspace(-4, 4, 9)
    mu = mu_field(s, ys, np.full(ys.shape, 0.3))
    assert np.ptp(mu) == 0.0 and mu[0] == pytest.approx(-0.04 * 8.0 * 2.0 / 2.0)


@pytest.mark.parametrize("model, rc", [(LogLaw(), 1.0), (GammaLaw(2.0), 2.0), (GammaLaw(1.5), 0.7)])
def test_constant_state_trace_is_straight(model, rc):
    s = scenario(model, idt.constant(0.4), idt.constant(rc), 0.2)
    tr = trace_forward(s, 0.3, 2.0)
    speed = 0.04 * rc * model.dp(rc)
    assert np.allclose(tr.positions, 0.3 - speed * tr.times, rtol=0, atol=1e-13)
    assert np.allclose(tr.x_euler, 0.3 + (0.4 - speed) * tr.times, rtol=0, atol=1e-13)
    xi, _ = find_foot(s, -1.0, 1.5)
    assert xi == pytest.approx(-1.0 + speed * 1.5, abs=1e-12)


def test_log_unit_state_trace_values():
    s = scenario(LogLaw(), ZERO, ONE)
    tr = trace_forward(s, 0.02, 1.0)
    assert tr.positions[-1] == pytest.approx(0.01, abs=1e-14)
    assert tr.crossed_jump_at is None
    assert float(find_feet(s, 0.0, 2.0).xi[0]) == pytest.approx(0.02, abs=1e-13)


def test_jump_crossing_time_located():
    s = scenario(LogLaw(), ZERO, idt.step(0.0, 1.0, 2.0))
    tr = trace_forward(s, 0.02, 3.0)
    # g = g0 on both sides, so the speed is -eps^2 throughout
    assert tr.crossed_jump_at == pytest.approx(2.0, abs=1e-11)
    assert tr.positions[-1] == pytest.approx(-0.01, abs=1e-12)
    assert not tr.right[-1] and tr.right[0]


def test_log_I_integral_equals_time(log_default):
    tr = trace_forward(log_default, 0.7, 0.9)
    assert np.allclose(tr.I_integral, tr.times, rtol=0, atol=1e-12)


def test_trace_invariants(gamma_default):
    s = gamma_default
    tr = trace_forward(s, 0.4, 0.8)
    z0 = s.z0_side(tr.positions, tr.right)
    assert np.allclose(s.model.p(tr.g), (z0 - tr.v_const) / s.eps2, rtol=1e-12, atol=0)
    assert np.all(np.diff(tr.I_integral) > 0)
    assert np.all(np.diff(tr.positions) <= 0)


def test_foot_at_time_zero_is_identity(log_default):
    ys = np.linspace(-2, 2, 7)
    assert np.array_equal(find_feet(log_default, ys, 0.0).xi, ys)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-4.0, max_value=4.0), st.floats(min_value=0.0, max_value=0.95))
def test_find_feet_round_trip(y, tau):
    s = _gamma_default()
    xi = float(find_feet(s, y, tau).xi[0])
    end = trace_forward(s, xi, tau, [0.0, tau]).positions[-1] if tau > 0 else xi
    assert end == pytest.approx(y, abs=1e-11)
    assert xi >= y - 1e-12


_CACHE = {}


def _gamma_default():
    if "g" not in _CACHE:
        _CACHE["g"] = Scenario(GammaLaw(1.0), idt.InitialData(idt.neg_tanh(), idt.step(0.0, 1.0, 2.0)), 0.1)
    return _CACHE["g"]


def test_foot_map_monotone(gamma_default):
    ys = np.linspace(-3, 3, 301)
    xi = find_feet(gamma_default, ys, 0.8).xi
    assert np.all(np.diff(xi) > 0)


def test_riccati_closed_form_values():
    assert riccati_alpha(0.0, 5.0, 1e-6) == 0.0
    tau = np.linspace(0, 0.9, 10)
    assert np.allclose(riccati_alpha(-1.0, tau, 1e-6), -1.0 / (1.0 - tau))
    pos = riccati_alpha(2.0, tau, 1e-6)
    assert np.all(pos > 0) and np.all(np.diff(pos) < 0)
    with pytest.raises(BlowupReached):
        riccati_alpha(-1.0, 1.0, 1e-6)


@given(st.floats(min_value=-5.0, max_value=5.0), st.floats(min_value=0.0, max_value=3.0))
def test_riccati_solves_its_ode(a0, I):
    # d alpha / dI = -alpha^2, checked by a centered difference in I
    if 1.0 + a0 * (I + 1e-4) <= 1e-2 or 1.0 + a0 * (I - 1e-4) <= 1e-2 or I < 1e-4:
        return
    h = 1e-5
    al = riccati_alpha(a0, I, 1e-6)
    d = (riccati_alpha(a0, I + h, 1e-6) - riccati_alpha(a0, I - h, 1e-6)) / (2 * h)
    assert d == pytest.approx(-al * al, rel=1e-5, abs=1e-9)


def test_alpha_along_linear_log(log_linear):
    assert alpha0(log_linear, 0.3) == pytest.approx(-1.0, rel=1e-9)
    prof = alpha_along(log_linear, trace_forward(log_linear, 0.3, 0.9))
    assert np.allclose(prof.alpha, -1.0 / (1.0 - prof.times), rtol=1e-8)


def test_blowup_time_linear_log_every_foot(log_linear):
    for xi in (-2.0, 0.0, 1.5):
        assert blowup_time_for_foot(log_linear, xi) == pytest.approx(1.0, abs=1e-8)


def test_blowup_time_flat_foot_infinite():
    s = scenario(LogLaw(), idt.neg_tanh(), ONE)
    assert blowup_time_for_foot(s, 0.0) < math.inf
    s2 = scenario(LogLaw(), ZERO, ONE)
    assert global_blowup_time(s2, np.linspace(-1, 1, 5)).T_b == math.inf


def test_blowup_beyond_t_max():
    s = scenario(LogLaw(), idt.linear(-0.1), ONE, numerics=Numerics(t_max=5.0))
    with pytest.raises(HorizonExceeded):
        blowup_time_for_foot(s, 0.0)


@pytest.mark.parametrize("u0, expected", [(idt.neg_tanh(), 1.0), (idt.linear(-0.5), 2.0)])
def test_global_blowup_log(u0, expected):
    s = scenario(LogLaw(), u0, ONE, 0.1)
    res = global_blowup_time(s, np.linspace(-5, 5, 101))
    assert res.T_b == pytest.approx(expected, abs=1e-6)
    assert np.all(res.T_b <= res.per_foot + 1e-12)
    if u0.label.startswith("neg_tanh"):
        assert abs(res.argmin_foot) < 0.05


def test_global_blowup_rarefaction():
    s = scenario(LogLaw(), idt.tanh(), ONE)
    assert global_blowup_time(s, np.linspace(-5, 5, 21)).T_b == math.inf


def test_gamma_linear_blowup_near_one():
    # for p = rho, u0 = -y, g0 = 1 the density along the characteristic is
    # 1/(1 - t) for every eps and 1 + a0 I = (1 - t)^2: a double root at 1
    for eps in (0.2, 0.1, 0.05):
        s = scenario(GammaLaw(1.0), idt.linear(-1.0), ONE, eps)
        assert blowup_time_for_foot(s, 0.0) == pytest.approx(1.0, abs=1e-3)


def crossing_time(eps, lo, hi):
    """Independent oracle: first time neighbouring first-family characteristics
    of p = rho, u0 = -tanh, g0 = 1 meet, from a scipy ODE solve of the family."""
    e2 = eps * eps
    xi = np.linspace(-0.3, 0.3, 12001)
    v = -np.tanh(xi)

    def rhs(t, y):
        g = (-np.tanh(y) + e2 - v) / e2
        return -e2 * g * g

    def gap(t):
        sol = solve_ivp(rhs, (0, t), xi, rtol=1e-12, atol=1e-14, method="DOP853")
        return float(np.min(np.diff(sol.y[:, -1])))

    for _ in range(30):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if gap(mid) > 0 else (lo, mid)
    return 0.5 * (lo + hi)


@pytest.mark.slow
def test_gamma_tanh_blowup_matches_crossing_oracle():
    s = scenario(GammaLaw(1.0), idt.neg_tanh(), ONE, 0.2)
    tb = global_blowup_time(s, np.linspace(-5, 5, 201), first_only=True).T_b
    assert tb == pytest.approx(crossing_time(0.2, 0.9, 0.96), abs=2e-3)


def test_scenario_rejections():
    with pytest.raises(ScenarioRejected):
        scenario(LogLaw(), ZERO, ONE, 0.0)
    two = idt.from_table([-1, 0, 0, 1, 1, 2], [1, 1, 2, 2, 3, 3])
    with pytest.raises(ScenarioRejected):
        scenario(LogLaw(), ZERO, two)
    with pytest.raises(ScenarioRejected) as exc:
        scenario(GammaLaw(1.0), idt.tanh(), idt.step(0.0, 1.0, 2.0))
    assert exc.value.jump == 0.0 and exc.value.margin < 0


def test_log_law_needs_no_epsilon_condition(caplog):
    s = scenario(LogLaw(), idt.tanh(), idt.step(0.0, 1.0, 2.0))
    assert s.x_jump == 0.0
    assert any("0-condition" in r.message for r in caplog.records)


def test_horizon_guard(log_default):
    assert log_default.horizon == pytest.approx(0.999, abs=1e-6)
    with pytest.raises(HorizonExceeded):
        find_feet(log_default, 0.0, 0.9995)
