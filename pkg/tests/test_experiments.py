import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from awrascle import initial_data as idt
from awrascle.errors import DegenerateFit
from awrascle.experiments import (SweepConfig, Bump, blowup_convergence,
                                  convergence_curves, convergence_velocity, fit_rate,
                                  sweep_errors, weak_refinement, weak_residual)
from awrascle.pressure import GammaLaw, LogLaw

from conftest import scenario

EPS = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])


def test_fit_exact_square():
    assert fit_rate(EPS, EPS**2) == pytest.approx((2.0, 0.0, 1.0), abs=1e-12)


def test_fit_linear_with_constant():
    assert fit_rate(EPS, 7 * EPS) == pytest.approx((1.0, math.log(7.0), 1.0), abs=1e-12)


def test_fit_injected_power_law():
    slope, _, r2 = fit_rate(EPS, 3 * EPS**2)
    assert round(slope, 3) == 2.0 and r2 == pytest.approx(1.0)


def test_fit_noisy_square():
    rng = np.random.default_rng(7)
    slopes = [fit_rate(EPS, EPS**2 * (1 + 0.01 * rng.standard_normal(EPS.size)))[0]
              for _ in range(200)]
    assert 1.9 <= min(slopes) and max(slopes) <= 2.1


@given(st.floats(min_value=-3, max_value=3), st.floats(min_value=1e-3, max_value=1e3))
def test_fit_recovers_any_power(k, c):
    slope, icpt, r2 = fit_rate(EPS, c * EPS**k)
    assert slope == pytest.approx(k, abs=1e-9)
    assert icpt == pytest.approx(math.log(c), abs=1e-8)
    assert 0.0 <= r2 <= 1.0


@given(st.lists(st.floats(min_value=1e-6, max_value=1.0), min_size=5, max_size=5))
def test_fit_r2_in_unit_interval(errs):
    _, _, r2 = fit_rate(EPS, errs)
    assert 0.0 <= r2 <= 1.0


@pytest.mark.parametrize("errs", [np.zeros(5), np.array([1, 2, 0, 3, 4.0]), -EPS])
def test_fit_rejects_nonpositive(errs):
    with pytest.raises(DegenerateFit):
        fit_rate(EPS, errs)


def test_fit_needs_three_points():
    with pytest.raises(DegenerateFit):
        fit_rate(EPS[:2], EPS[:2])


def test_sweep_config_validation(log_default):
    with pytest.raises(ValueError):
        SweepConfig(log_default, t_star=1.0)
    with pytest.raises(ValueError):
        SweepConfig(log_default, epsilons=(0.1, 0.2, 0.05))


def test_constant_state_sweep_is_degenerate():
    s = scenario(LogLaw(), idt.constant(0.2), idt.constant(1.0))
    cfg = SweepConfig(s, epsilons=(0.2, 0.1, 0.05), nx=11, nt=3, seeds=((0.0, 0.5),))
    table = sweep_errors(cfg)
    rep = convergence_velocity(cfg, table)
    assert rep.degenerate and all(e == 0 for e in rep.errors)
    curves = convergence_curves(cfg, table)
    assert curves["lambda2"].degenerate
    # the triangle still opens at exactly eps^2 rho p'(rho) t
    tri = curves["triangle"]
    assert tri.errors == pytest.approx([e * e * 0.5 for e in (0.2, 0.1, 0.05)], rel=1e-8)
    assert tri.slope == pytest.approx(2.0, abs=1e-6)


def test_small_sweep_errors_decrease(log_default):
    cfg = SweepConfig(log_default, epsilons=(0.2, 0.1, 0.05), nx=41, nt=11)
    rows, skipped = sweep_errors(cfg)
    assert not skipped
    for q in ("u", "lambda1", "lambda2", "x2", "triangle"):
        errs = [getattr(r, q) for r in rows]
        assert all(b <= a for a, b in zip(errs, errs[1:])), q


def test_sweep_skips_eps_with_early_blowup():
    # pressure makes p = rho blow up before the pressureless time for large eps
    s = scenario(GammaLaw(1.0), idt.neg_tanh(), idt.constant(1.0), 0.2)
    cfg = SweepConfig(s, epsilons=(0.2, 0.1, 0.05), t_star=0.95, nx=11, nt=3, seeds=())
    rows, skipped = sweep_errors(cfg)
    assert [e for e, _ in skipped] == [0.2]
    assert [r.eps for r in rows] == [0.1, 0.05]


def test_convergence_csv_written(tmp_path):
    s = scenario(LogLaw(), idt.constant(0.0), idt.constant(1.0))
    cfg = SweepConfig(s, epsilons=(0.2, 0.1, 0.05), nx=5, nt=2, seeds=(), out_dir=tmp_path)
    sweep_errors(cfg)
    lines = (tmp_path / "convergence.csv").read_text().splitlines()
    assert lines[0] == "epsilon,sup_err_u,sup_err_lambda1,sup_err_lambda2,sup_err_x2,triangle_width"
    assert len(lines) == 4


def test_blowup_convergence_log(log_default, tmp_path):
    rep = blowup_convergence(log_default, out_dir=tmp_path)
    assert rep.conditions == (True, True)
    assert rep.passed
    assert all(abs(r[1] - 1.0) <= 1e-6 and r[3] <= 1e-3 for r in rep.rows)
    assert (tmp_path / "blowup.csv").read_text().startswith("epsilon,T_b_eps,T_b_bar,gap\n")


def test_blowup_convergence_rarefaction():
    s = scenario(LogLaw(), idt.tanh(), idt.constant(1.0))
    rep = blowup_convergence(s)
    assert all(r[1] == math.inf and r[2] == math.inf for r in rep.rows)
    assert rep.checks["liminf_inequality"]


def test_blowup_convergence_gamma_one_approaches_pressureless():
    s = scenario(GammaLaw(1.0), idt.neg_tanh(), idt.constant(1.0))
    rep = blowup_convergence(s)
    assert rep.conditions == (False, True)
    assert set(rep.checks) == {"liminf_inequality"}
    gaps = [r[3] for r in rep.rows]
    assert gaps[0] > gaps[1] > gaps[2]
    assert rep.T_b_bar == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("model, rc", [(LogLaw(), 1.0), (GammaLaw(2.0), 2.0)])
def test_weak_residual_constant_state(model, rc):
    s = scenario(model, idt.constant(0.3), idt.constant(rc))
    mass, mom = weak_residual(s, 4, 3, 8, t_end=1.0)
    assert mass <= 1e-8 and mom <= 1e-8


def test_weak_residual_smooth_region(log_default):
    fns = [Bump(-2.5, 0.25, 1.2, 0.2), Bump(2.0, 0.3, 1.0, 0.15)]
    mass, mom = weak_residual(log_default, grid_n=24, t_end=0.5, fns=fns)
    assert mass <= 1e-6 and mom <= 1e-6


def test_weak_refinement_default(log_default, tmp_path):
    rows = weak_refinement(log_default, (8, 16), 8, 0, out_dir=tmp_path)
    for i in (1, 2):
        assert rows[0][i] >= 3 * rows[1][i]
    assert (tmp_path / "weak.csv").read_text().startswith("grid_n,mass_residual,momentum_residual\n")


def test_weak_residual_seeded(log_default):
    a = weak_residual(log_default, 3, 11, 6)
    b = weak_residual(log_default, 3, 11, 6)
    assert a == b
