"""Vanishing-pressure experiments: eps sweeps, rate fits, blow-up times and
weak-form residuals."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _io
from .characteristics import Scenario, find_feet, global_blowup_time
from .errors import DegenerateFit, ScenarioRejected
from .euler_map import discontinuity_curve, sample_eulerian_points, triangle_width
from .pressure import check_blowup_conditions
from .pressureless import (PressurelessSolution, blowup_time_bar, discontinuity_bar,
                           eulerian_bar)

DEFAULT_EPSILONS = (0.2, 0.1, 0.05, 0.025, 0.0125)
SLOPE_BAND = (1.7, 2.3)
MIN_R2 = 0.98
TOL_TB = 1e-3

QUANTITIES = ("u", "lambda1", "lambda2", "x2", "triangle")


@dataclass
class SweepConfig:
    template: Scenario
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    t_star: float = 0.5
    nx: int = 201
    nt: int = 101
    seeds: tuple[tuple[float, float], ...] = ((0.0, 0.5),)
    band_factor: float = 1.0
    n_fan: int = 2001
    out_dir: str | Path | None = None

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ValueError("eps list must be decreasing")
        tb = blowup_time_bar(self.pressureless)
        if not self.t_star < tb:
            raise ValueError(f"T* = {self.t_star} must be below the pressureless blow-up time {tb}")

    @property
    def pressureless(self) -> PressurelessSolution:
        s = self.template
        return PressurelessSolution(s.data, s.window, s.numerics.grid_n)

    def scenario(self, eps: float) -> Scenario:
        return dataclasses.replace(self.template, eps=eps)


@dataclass
class RateReport:
    quantity: str
    epsilons: list
    errors: list
    slope: float = math.nan
    intercept: float = math.nan
    r2: float = math.nan
    degenerate: bool = False
    skipped: list = field(default_factory=list)

    def in_band(self, band=SLOPE_BAND, min_r2: float = MIN_R2) -> bool:
        return (not self.degenerate and band[0] <= self.slope <= band[1] and self.r2 >= min_r2)


def fit_rate(eps, errs) -> tuple[float, float, float]:
    """Least squares ``log err = slope log eps + intercept``; returns R^2 too."""
    eps = np.asarray(eps, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if eps.size < 3 or eps.size != errs.size:
        raise DegenerateFit("need at least three (eps, err) pairs")
    if np.any(~np.isfinite(errs)) or np.any(errs <= 0):
        raise DegenerateFit("errors must be positive and finite")
    lx, ly = np.log(eps), np.log(errs)
    slope, intercept = np.polyfit(lx, ly, 1)
    res = ly - (slope * lx + intercept)
    tot = ly - ly.mean()
    ss_tot = float(tot @ tot)
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - float(res @ res) / ss_tot)
    return float(slope), float(intercept), float(r2)


def _report(name, eps, errs, skipped) -> RateReport:
    rep = RateReport(name, list(eps), list(errs), skipped=list(skipped))
    try:
        rep.slope, rep.intercept, rep.r2 = fit_rate(eps, errs)
    except DegenerateFit:
        rep.degenerate = True
    return rep


# ------------------------------------------------------------------ sweeps

@dataclass
class SweepRow:
    eps: float
    u: float
    lambda1: float
    lambda2: float
    x2: float
    triangle: float
    rho_off_band: float


def sweep_one(cfg: SweepConfig, eps: float) -> SweepRow:
    """Errors against the pressureless solution for one eps."""
    s = cfg.scenario(eps)
    if not cfg.t_star < s.horizon:
        raise ScenarioRejected(f"T* = {cfg.t_star} is not below the blow-up horizon {s.horizon:.6g}")
    sol = cfg.pressureless
    xs = np.linspace(s.window[0], s.window[1], cfg.nx)
    ts = np.linspace(0.0, cfg.t_star, cfg.nt)
    X, T = np.meshgrid(xs, ts)
    X, T = X.ravel(), T.ravel()
    smp = sample_eulerian_points(s, X, T, cfg.n_fan)
    rho_bar, u_bar, _ = eulerian_bar(sol, X, T)
    err_u = float(np.max(np.abs(smp.u - u_bar)))
    err_l1 = float(np.max(np.abs(smp.lambda1 - u_bar)))
    err_l2 = float(np.max(np.abs(smp.lambda2 - u_bar)))
    if s.x_jump is not None:
        curve = discontinuity_curve(s, ts)
        xbar = discontinuity_bar(sol, s.x_jump, ts)
        err_x2 = float(np.max(np.abs(curve.x - xbar)))
        band = cfg.band_factor * max(cfg.epsilons) ** 2
        k = np.searchsorted(ts, T)
        near = (np.abs(X - curve.x[k]) <= band) | (np.abs(X - xbar[k]) <= band)
        rho_err = float(np.max(np.abs(smp.rho - rho_bar)[~near]))
    else:
        err_x2 = 0.0
        rho_err = float(np.max(np.abs(smp.rho - rho_bar)))
    tri = max((triangle_width(s, xs_, ts_) for xs_, ts_ in cfg.seeds), default=0.0)
    return SweepRow(eps, err_u, err_l1, err_l2, err_x2, tri, rho_err)


def sweep_errors(cfg: SweepConfig) -> tuple[list[SweepRow], list[tuple[float, str]]]:
    """Run every eps; those whose blow-up comes before ``T*`` are skipped."""
    rows, skipped = [], []
    for eps in cfg.epsilons:
        try:
            rows.append(sweep_one(cfg, eps))
        except ScenarioRejected as exc:
            skipped.append((eps, str(exc)))
    if cfg.out_dir is not None:
        write_convergence_csv(Path(cfg.out_dir) / "convergence.csv", rows)
    return rows, skipped


def write_convergence_csv(path, rows):
    return _io.write_csv(path, ("epsilon", "sup_err_u", "sup_err_lambda1", "sup_err_lambda2",
                                "sup_err_x2", "triangle_width"),
                         [(r.eps, r.u, r.lambda1, r.lambda2, r.x2, r.triangle) for r in rows])


def convergence_velocity(cfg: SweepConfig, table=None) -> RateReport:
    rows, skipped = table if table is not None else sweep_errors(cfg)
    return _report("u", [r.eps for r in rows], [r.u for r in rows], skipped)


def convergence_curves(cfg: SweepConfig, table=None) -> dict[str, RateReport]:
    """Rates for ``x2``, ``lambda1``, ``lambda2`` and the triangle width."""
    rows, skipped = table if table is not None else sweep_errors(cfg)
    eps = [r.eps for r in rows]
    return {q: _report(q, eps, [getattr(r, q) for r in rows], skipped)
            for q in ("x2", "lambda1", "lambda2", "triangle")}


# -------------------------------------------------------------- blow-up

@dataclass
class BlowupReport:
    rows: list
    T_b_bar: float
    conditions: tuple[bool, bool]
    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def blowup_convergence(template: Scenario, epsilons=DEFAULT_EPSILONS[:3], tol: float = TOL_TB,
                       foot_n: int | None = None, out_dir=None) -> BlowupReport:
    """``T_b^eps`` per eps against the pressureless ``T_b``.

    The inequality ``T_b <= T_b^eps + tol`` is always checked.  Convergence
    of the gap is only claimed when the curvature conditions hold.
    """
    sol = PressurelessSolution(template.data, template.window, template.numerics.grid_n)
    tb = blowup_time_bar(sol)
    n = foot_n or template.numerics.blowup_grid_n
    rows = []
    for eps in epsilons:
        s = dataclasses.replace(template, eps=eps)
        grid = np.linspace(s.window[0], s.window[1], n)
        if s.x_jump is not None:
            grid = np.union1d(grid, [s.x_jump])
        tbe = global_blowup_time(s, grid, first_only=True).T_b
        gap = abs(tbe - tb) if math.isfinite(tb) or math.isfinite(tbe) else 0.0
        if not math.isfinite(tb) and not math.isfinite(tbe):
            gap = 0.0
        rows.append((eps, tbe, tb, gap))
    cond = check_blowup_conditions(template.model)
    checks = {"liminf_inequality": all(tb <= r[1] + tol for r in rows)}
    if all(cond):
        gaps = [r[3] for r in rows]
        checks["gap_nonincreasing"] = all(b <= a + tol for a, b in zip(gaps, gaps[1:]))
        checks["final_gap"] = gaps[-1] <= tol
    if out_dir is not None:
        _io.write_csv(Path(out_dir) / "blowup.csv", ("epsilon", "T_b_eps", "T_b_bar", "gap"), rows)
    return BlowupReport(rows, tb, cond, checks)


# ------------------------------------------------------------ weak form

def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    d = np.zeros_like(s)
    m = np.abs(s) < 1.0
    q = 1.0 - s[m] ** 2
    out[m] = np.exp(-1.0 / q)
    d[m] = out[m] * (-2.0 * s[m] / q**2)
    return out, d


@dataclass(frozen=True)
class Bump:
    xc: float
    tc: float
    rx: float
    rt: float

    def values(self, x, t):
        bx, dbx = _bump((x - self.xc) / self.rx)
        bt, dbt = _bump((t - self.tc) / self.rt)
        return bx * bt, bx * dbt / self.rt, dbx * bt / self.rx


def bump_family(s: Scenario, n_test: int, rng_seed: int, t_end: float, x_box=None):
    """Seeded bumps supported inside ``x_box x (0, t_end)``."""
    rng = np.random.default_rng(rng_seed)
    a, b = x_box if x_box is not None else (0.6 * s.window[0], 0.6 * s.window[1])
    out = []
    for _ in range(n_test):
        rx = rng.uniform(0.3, 0.3 * (b - a))
        xc = rng.uniform(a + rx, b - rx)
        rt = rng.uniform(0.15, 0.45) * t_end
        tc = rng.uniform(rt, t_end - rt)
        out.append(Bump(float(xc), float(tc), float(rx), float(rt)))
    return out


def _weak_nodes(s: Scenario, fns, grid_n: int):
    """Gauss-Legendre tensor nodes per test function, split at the curve."""
    gx, gw = np.polynomial.legendre.leggauss(grid_n)
    t_all = np.concatenate([f.tc + f.rt * gx for f in fns])
    x2 = {}
    if s.x_jump is not None:
        feet = find_feet(s, np.full(t_all.shape, s.x_jump), t_all)
        x2 = dict(zip(t_all.tolist(), feet.x_end.tolist()))
    X, T, W, owner = [], [], [], []
    for i, f in enumerate(fns):
        for tn, tw in zip(f.tc + f.rt * gx, f.rt * gw):
            cuts = [f.xc - f.rx, f.xc + f.rx]
            c = x2.get(float(tn))
            if c is not None and cuts[0] < c < cuts[1]:
                cuts.insert(1, c)
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                half = 0.5 * (hi - lo)
                X.append(0.5 * (lo + hi) + half * gx)
                W.append(tw * half * gw)
                T.append(np.full(grid_n, tn))
                owner.append(np.full(grid_n, i))
    return (np.concatenate(X), np.concatenate(T), np.concatenate(W), np.concatenate(owner))


def weak_residual(s: Scenario, n_test: int = 8, rng_seed: int = 0, grid_n: int = 16,
                  t_end: float | None = None, x_box=None, fns=None) -> tuple[float, float]:
    """Largest mass and momentum weak-form residuals over seeded test functions.

    The test functions vanish at ``t = 0``, so the initial-data terms drop out.
    """
    if t_end is None:
        tb = s.blowup_estimate
        t_end = 0.5 * min(tb, 2.0) if math.isfinite(tb) else 1.0
    if fns is None:
        fns = bump_family(s, n_test, rng_seed, t_end, x_box)
    X, T, W, owner = _weak_nodes(s, fns, grid_n)
    smp = sample_eulerian_points(s, X, T)
    rho, u = smp.rho, smp.u
    z = u + s.eps2 * s.model.p(rho)
    mass = np.zeros(len(fns))
    mom = np.zeros(len(fns))
    for i, f in enumerate(fns):
        m = owner == i
        _, phit, phix = f.values(X[m], T[m])
        flux = phit + u[m] * phix
        mass[i] = np.sum(W[m] * rho[m] * flux)
        mom[i] = np.sum(W[m] * rho[m] * z[m] * flux)
    return float(np.max(np.abs(mass))), float(np.max(np.abs(mom)))


def weak_refinement(s: Scenario, grids=(8, 16), n_test: int = 8, rng_seed: int = 0,
                    out_dir=None, **kw) -> list[tuple[int, float, float]]:
    """Residuals for each quadrature resolution, optionally written to weak.csv."""
    rows = [(int(n), *weak_residual(s, n_test, rng_seed, n, **kw)) for n in grids]
    if out_dir is not None:
        _io.write_csv(Path(out_dir) / "weak.csv", ("grid_n", "mass_residual", "momentum_residual"), rows)
    return rows
