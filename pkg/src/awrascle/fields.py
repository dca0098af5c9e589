"""Point samples of the Lagrangian solution and the checks built on them."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .characteristics import (Scenario, _march_to, _State, alpha0, find_feet,
                              riccati_alpha)
from .errors import BlowupReached, BracketFailure, HorizonExceeded, VacuumEncountered
from .initial_data import check_epsilon_condition
from .pressure import LimitClass

BOUND_TOL = 1e-8
TAU_M_TOL = 1e-6


class Region(str, enum.Enum):
    OMEGA_PLUS = "OmegaPlus"
    OMEGA_I = "OmegaI"
    OMEGA_II = "OmegaII"
    JUMP_LINE = "JumpLine"


@dataclass(frozen=True)
class FieldSample:
    v: float
    Z: float
    g: float
    J: float
    grad: float
    region: Region
    foot: float
    g_minus: float | None = None
    g_plus: float | None = None


@dataclass
class FieldSamples:
    """Array version of :class:`FieldSample`, one entry per ``(y, tau)``."""

    y: np.ndarray
    tau: np.ndarray
    foot: np.ndarray
    v: np.ndarray
    Z: np.ndarray
    g: np.ndarray
    J: np.ndarray
    grad: np.ndarray
    region: np.ndarray
    g_minus: np.ndarray
    g_plus: np.ndarray

    def __len__(self):
        return self.y.size

    def __getitem__(self, i) -> FieldSample:
        jl = self.region[i] == Region.JUMP_LINE.value
        return FieldSample(float(self.v[i]), float(self.Z[i]), float(self.g[i]), float(self.J[i]),
                           float(self.grad[i]), Region(self.region[i]), float(self.foot[i]),
                           float(self.g_minus[i]) if jl else None,
                           float(self.g_plus[i]) if jl else None)


def boundary_positions(s: Scenario, tau) -> np.ndarray:
    """``y1(tau)``: the characteristic leaving ``(x_jump, 0)`` on the left side."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if s.x_jump is None:
        return np.full(tau.shape, -np.inf)
    st = _march_to(s, _State.start(s, np.full(tau.shape, s.x_jump)), tau)
    return st.y


def classify_regions(s: Scenario, y, tau) -> np.ndarray:
    y, tau = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(tau, dtype=float))
    out = np.full(y.shape, Region.OMEGA_PLUS.value, dtype=object)
    if s.x_jump is None:
        return out
    xj = s.x_jump
    left = y < xj
    out[y == xj] = Region.JUMP_LINE.value
    if left.any():
        y1 = boundary_positions(s, tau[left])
        out[left] = np.where(y[left] >= y1, Region.OMEGA_I.value, Region.OMEGA_II.value)
    return out


def classify_region(s: Scenario, y: float, tau: float) -> Region:
    """Region of the Lagrangian point ``(y, tau)`` relative to the jump."""
    return Region(classify_regions(s, y, tau).item())


def sample_lagrangian_batch(s: Scenario, y, tau, override: bool = False) -> FieldSamples:
    y, tau = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(tau, dtype=float))
    y, tau = y.ravel(), tau.ravel()
    feet = find_feet(s, y, tau, override)
    right = s.side_of(y)
    v = feet.v
    Z = s.z0_side(y, right)
    g = s.density(y, v, right)
    J = s.g0_side(y, right) / g
    a = riccati_alpha(alpha0(s, feet.xi), feet.I, s.numerics.delta_blow)
    grad = a / (g * s.model.dp(g))
    region = classify_regions(s, y, tau)
    g_minus = np.full(y.shape, np.nan)
    g_plus = np.full(y.shape, np.nan)
    on = region == Region.JUMP_LINE.value
    if on.any():
        g_minus[on] = g[on]
        g_plus[on] = s.density(y[on], v[on], np.ones(int(on.sum()), dtype=bool))
    return FieldSamples(y, tau, feet.xi, v, Z, g, J, grad, region, g_minus, g_plus)


def sample_lagrangian(s: Scenario, y: float, tau: float, override: bool = False) -> FieldSample:
    """All Lagrangian fields at one point; ``grad`` is ``J^-1 v_y``."""
    return sample_lagrangian_batch(s, y, tau, override)[0]


# ----------------------------------------------------------- density bounds

@dataclass
class BoundReport:
    grid: str
    worst_ratio: float
    violations: list
    passed: bool
    rows: list
    jump_order_ok: bool = True

    def csv_rows(self):
        return [("y", "tau", "region", "g", "bound", "ratio")] + self.rows


def verify_density_bounds(s: Scenario, ys, taus, g_transform: Callable | None = None,
                          refine: int = 4, n_band: int = 11) -> BoundReport:
    """Compare sampled densities with the region-wise lower bounds.

    Region I is a thin band left of the jump, so ``n_band`` extra labels
    spread over ``[y1(max tau), x_jump)`` are added to ``ys``.
    ``g_transform`` corrupts the sampled density before the comparison and
    exists for negative controls.  The running minimum of ``g(0-, .)`` used
    in region I is sampled ``refine`` times finer than ``taus``.
    """
    ys = np.asarray(ys, dtype=float)
    taus = np.asarray(taus, dtype=float)
    if s.x_jump is not None and n_band > 0 and taus.max() > 0:
        y1 = float(boundary_positions(s, taus.max())[0])
        ys = np.union1d(ys, np.linspace(y1, s.x_jump, n_band + 1)[:-1])
    Y, T = np.meshgrid(ys, taus, indexing="ij")
    smp = sample_lagrangian_batch(s, Y.ravel(), T.ravel())
    g = smp.g if g_transform is None else g_transform(smp.g)
    a1, a2, B = s.constants
    bound = a1 / (1.0 + a2 * B * smp.tau)
    jump_ok = True
    xj = s.x_jump
    if xj is not None:
        on = smp.region == Region.JUMP_LINE.value
        left_val, right_val = s.data.g0.one_sided[0]
        if s.model.limit_class is LimitClass.FINITE_ZERO:
            if left_val < right_val:
                margin = check_epsilon_condition(s.data, s.model, s.eps, s.window,
                                                 s.numerics.grid_n)[0].margin
                bound[on] = s.model.inverse(margin / s.eps2)
        else:
            xs = np.linspace(s.window[0], s.window[1], s.numerics.grid_n)
            vmax = float(np.max(np.abs(s.v0(xs))))
            gmin = a1
            bound[on] = s.model.inverse(s.model.p(gmin) - 2.0 * vmax / s.eps2)
        if on.any() and left_val < right_val:
            gm = smp.g_minus[on] if g_transform is None else g_transform(smp.g_minus[on])
            gp = smp.g_plus[on] if g_transform is None else g_transform(smp.g_plus[on])
            jump_ok = bool(np.all(gp > gm))
        inside = smp.region == Region.OMEGA_I.value
        if inside.any():
            tmax = float(np.max(taus))
            fine = np.linspace(0.0, tmax, refine * max(taus.size - 1, 1) + 1)
            fine = np.union1d(fine, taus)
            edge = sample_lagrangian_batch(s, np.full(fine.shape, xj), fine).g
            if g_transform is not None:
                edge = g_transform(edge)
            run_min = np.minimum.accumulate(edge)
            a1p = run_min[np.searchsorted(fine, smp.tau[inside], side="right") - 1]
            bound[inside] = a1p / (1.0 + a1p * B * smp.tau[inside])
    ratio = g / bound
    bad = ratio < 1.0 - BOUND_TOL
    violations = [(float(a), float(b), str(r), float(c), float(d))
                  for a, b, r, c, d in zip(smp.y[bad], smp.tau[bad], smp.region[bad], g[bad], bound[bad])]
    rows = [(float(a), float(b), str(r), float(c), float(d), float(e))
            for a, b, r, c, d, e in zip(smp.y, smp.tau, smp.region, g, bound, ratio)]
    desc = f"{ys.size}x{taus.size} lattice y in [{ys.min():g},{ys.max():g}], tau in [{taus.min():g},{taus.max():g}]"
    passed = not violations and jump_ok
    return BoundReport(desc, float(np.min(ratio)), violations, passed, rows, jump_ok)


# -------------------------------------------------------------- level sets

def level_inf(s: Scenario, tau: float, y_grid, override: bool = False) -> float:
    """``m(tau) = min_y J^-1 v_y`` over ``y_grid``."""
    y_grid = np.asarray(y_grid, dtype=float)
    smp = sample_lagrangian_batch(s, y_grid, np.full(y_grid.shape, float(tau)), override)
    return float(np.min(smp.grad))


@lru_cache(maxsize=8192)
def _level_cached(s: Scenario, tau: float, y_key: bytes) -> float:
    y_grid = np.frombuffer(y_key, dtype=float)
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            m = level_inf(s, tau, y_grid, override=True)
    except (BlowupReached, BracketFailure, HorizonExceeded, VacuumEncountered):
        return -math.inf
    return m if not math.isnan(m) else -math.inf


def _level_or_minus_inf(s, tau, y_grid):
    return _level_cached(s, float(tau), np.ascontiguousarray(y_grid, dtype=float).tobytes())


def tau_M(s: Scenario, M: float, T: float, tau_grid, y_grid=None, tol: float = TAU_M_TOL) -> float:
    """Largest ``t <= T`` with ``m(tau) >= -M`` for all sampled ``tau <= t``.

    Times past blow-up count as ``m = -inf``.  The first failing grid time is
    refined by bisection against the last passing one.
    """
    if M <= 0:
        raise ValueError("M must be positive")
    if y_grid is None:
        y_grid = np.linspace(s.window[0], s.window[1], 201)
    grid = np.asarray(tau_grid, dtype=float)
    grid = np.union1d(grid[grid <= T], [0.0, T])
    last_ok = None
    for t in grid:
        if _level_or_minus_inf(s, t, y_grid) >= -M:
            last_ok = t
            continue
        if last_ok is None:
            return 0.0
        lo, hi = last_ok, t
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if _level_or_minus_inf(s, mid, y_grid) >= -M:
                lo = mid
            else:
                hi = mid
        return lo
    return float(T)
