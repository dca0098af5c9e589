"""Characteristics of the first family in Lagrangian coordinates.

Along a characteristic the velocity is frozen at ``v = v0(xi)`` and the
density is recovered from ``p(g) = (Z0(y) - v) / eps**2``, so the path obeys
the closed ODE ``dy/dtau = mu(y, v)``.  The tracer carries three quantities
per characteristic: the Lagrangian label ``y``, the Eulerian position ``x``
(``dx/dt = lambda1``) and the running integral of ``I(g)``.

Everything here is vectorized over many feet at once.  Each element also
carries a side flag telling which segment of ``Z0``/``g0`` it uses; since
characteristics move left, the flag can only switch from right to left, at
the single density jump.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (BlowupReached, BracketFailure, HorizonExceeded, OutOfRange,
                     ScenarioRejected, VacuumEncountered)
from .initial_data import (InitialData, bound_constants, check_epsilon_condition,
                           check_zero_condition, lipschitz_constant, riemann_invariant_initial)
from .pressure import LimitClass, PressureModel, validate_admissibility

log = logging.getLogger(__name__)

CROSS_TOL = 1e-12


@dataclass(frozen=True)
class Numerics:
    ode_steps_per_unit_time: int = 1000
    tol_foot: float = 1e-12
    tol_inv: float = 1e-12
    delta_blow: float = 1e-6
    grid_n: int = 4096
    fd_rel_step: float = 1e-6
    t_max: float = 5.0
    horizon_factor: float = 0.999
    blowup_grid_n: int = 201
    n_quad: int = 256

    @property
    def h(self) -> float:
        return 1.0 / self.ode_steps_per_unit_time


@dataclass(frozen=True, eq=False)
class Scenario:
    """Immutable problem definition.

    Construction validates admissibility of the pressure law on the density
    range the solution can reach before ``numerics.t_max`` and, for laws with
    ``p(0+) = 0``, the strict jump condition at an increasing density jump.
    """

    model: PressureModel
    data: InitialData
    eps: float
    window: tuple[float, float] = (-5.0, 5.0)
    numerics: Numerics = field(default_factory=Numerics)

    def __post_init__(self):
        if not self.eps > 0:
            raise ScenarioRejected(f"eps must be positive, got {self.eps}")
        if len(self.data.g0.jumps) > 1:
            raise ScenarioRejected("at most one density jump per scenario")
        a1, a2, _ = self.constants
        if a1 <= 0:
            raise ScenarioRejected(f"initial density must be positive, min is {a1}")
        lip = lipschitz_constant(self.data.u0, self.window, self.numerics.grid_n)
        hi = 2.0 * a2 * math.exp(min(lip * self.numerics.t_max, 600.0))
        rep = validate_admissibility(self.model, (a1 / 2.0, hi), 1000)
        if not rep.passed:
            rho, which = rep.violations[0]
            raise ScenarioRejected(f"pressure law not admissible: {which} fails at rho={rho:.6g}")
        if self.model.limit_class is LimitClass.FINITE_ZERO:
            for v in check_epsilon_condition(self.data, self.model, self.eps, self.window,
                                             self.numerics.grid_n):
                if not v.holds:
                    raise ScenarioRejected(
                        f"eps-condition fails at x={v.jump} (margin {v.margin:.3g})",
                        jump=v.jump, margin=v.margin)
        else:
            for v in check_zero_condition(self.data, self.window, self.numerics.grid_n):
                if not v.holds:
                    log.warning("0-condition fails at x=%g; vanishing-pressure limits may not apply", v.jump)

    # -- derived data -------------------------------------------------------

    @cached_property
    def constants(self) -> tuple[float, float, float]:
        return bound_constants(self.data, self.model, self.eps, self.window, self.numerics.grid_n)

    @cached_property
    def z0(self):
        return riemann_invariant_initial(self.data, self.model, self.eps)

    @property
    def x_jump(self) -> float | None:
        j = self.data.g0.jumps
        return j[0] if j else None

    @property
    def eps2(self) -> float:
        return self.eps * self.eps

    def v0(self, xi):
        return self.data.u0.segments[0](np.asarray(xi, dtype=float))

    def dv0(self, xi):
        """Centered difference of ``v0`` with a step tied to the window width."""
        h = self.numerics.fd_rel_step * (self.window[1] - self.window[0])
        xi = np.asarray(xi, dtype=float)
        f = self.data.u0.segments[0]
        return (f(xi + h) - f(xi - h)) / (2.0 * h)

    def side_of(self, y) -> np.ndarray:
        """True where ``y`` lies strictly right of the jump."""
        y = np.asarray(y, dtype=float)
        if self.x_jump is None:
            return np.zeros(y.shape, dtype=bool)
        return y > self.x_jump

    @cached_property
    def _sides(self):
        """Raw per-segment evaluators of ``Z0`` and ``g0`` (no validation)."""
        model, e2 = self.model, self.eps2
        u = self.data.u0.segments[0]
        gs = self.data.g0.segments
        zs = tuple((lambda y, g=g: u(y) + e2 * model._p(g(y))) for g in gs)
        return zs, gs

    def z0_side(self, y, right):
        return _pick(self._sides[0], y, right)

    def g0_side(self, y, right):
        return _pick(self._sides[1], y, right)

    def density(self, y, v, right):
        """``g = p^-1((Z0(y) - v)/eps^2)`` on the given side."""
        q = (self.z0_side(y, right) - v) / self.eps2
        if self.model.limit_class is LimitClass.FINITE_ZERO and not np.all(q > 0):
            raise VacuumEncountered(f"pressure argument {np.min(q):.3g} gives zero density")
        try:
            return self.model._inverse(np.asarray(q, dtype=float), self.numerics.tol_inv)
        except OutOfRange as exc:
            raise VacuumEncountered(str(exc)) from exc

    @cached_property
    def blowup_estimate(self) -> float:
        """Smallest blow-up time over a foot grid on the window."""
        grid = np.linspace(self.window[0], self.window[1], self.numerics.blowup_grid_n)
        if self.x_jump is not None:
            grid = np.union1d(grid, [self.x_jump])
        return global_blowup_time(self, grid, first_only=True, xtol_frac=0.02).T_b

    @property
    def horizon(self) -> float:
        tb = self.blowup_estimate
        return min(self.numerics.horizon_factor * tb, self.numerics.t_max)

    def check_horizon(self, tau, override: bool = False):
        if override:
            if np.any(np.asarray(tau) > self.numerics.t_max):
                raise HorizonExceeded(f"time beyond t_max = {self.numerics.t_max}")
            return
        if np.any(np.asarray(tau) >= self.horizon):
            raise HorizonExceeded(
                f"time {np.max(tau):.6g} is past the safety horizon {self.horizon:.6g}")


def _pick(segs, y, right):
    if len(segs) == 1:
        return segs[0](y)
    if np.ndim(right) == 0:
        return segs[1](y) if right else segs[0](y)
    if right.all():
        return segs[1](y)
    if not right.any():
        return segs[0](y)
    return np.where(right, segs[1](y), segs[0](y))


# --------------------------------------------------------------- the tracer

def mu_field(s: Scenario, y, v, right=None):
    """``mu = -(eps^2/g0(y)) g^2 p'(g)``; never positive."""
    if right is None:
        right = s.side_of(y)
    g = s.density(y, v, right)
    return -s.eps2 * g * g * s.model.dp(g) / s.g0_side(y, right)


def _rhs(s: Scenario, y, v, right):
    g = s.density(y, v, right)
    gdp = g * s.model._dp(g)
    mu = -s.eps2 * g * gdp / s.g0_side(y, right)
    return mu, v - s.eps2 * gdp, s.model._curvature(g)


def _rk4(s: Scenario, y, v, right, h):
    m1, l1, i1 = _rhs(s, y, v, right)
    m2, l2, i2 = _rhs(s, y + 0.5 * h * m1, v, right)
    m3, l3, i3 = _rhs(s, y + 0.5 * h * m2, v, right)
    m4, l4, i4 = _rhs(s, y + h * m3, v, right)
    c = h / 6.0
    return (c * (m1 + 2 * m2 + 2 * m3 + m4),
            c * (l1 + 2 * l2 + 2 * l3 + l4),
            c * (i1 + 2 * i2 + 2 * i3 + i4))


@dataclass
class _State:
    """Per-characteristic integration state (all arrays of equal length)."""

    xi: np.ndarray
    y: np.ndarray
    x: np.ndarray
    I: np.ndarray
    v: np.ndarray
    right: np.ndarray
    t: np.ndarray
    t_cross: np.ndarray

    @classmethod
    def start(cls, s: Scenario, xi) -> "_State":
        xi = np.array(xi, dtype=float, ndmin=1)
        z = np.zeros_like(xi)
        return cls(xi, xi.copy(), xi.copy(), z, s.v0(xi).astype(float), s.side_of(xi),
                   z.copy(), np.full_like(xi, np.nan))

    def take(self, idx) -> "_State":
        return _State(*(getattr(self, f)[idx].copy() for f in self.__dataclass_fields__))

    def put(self, idx, other: "_State"):
        for f in self.__dataclass_fields__:
            getattr(self, f)[idx] = getattr(other, f)

    def copy(self) -> "_State":
        return self.take(slice(None))


def _step(s: Scenario, st: _State, h) -> _State:
    """Advance every element by one RK4 step of size ``h`` (scalar or array)."""
    h = np.broadcast_to(np.asarray(h, dtype=float), st.y.shape)
    dy, dx, dI = _rk4(s, st.y, st.v, st.right, h)
    new = _State(st.xi, st.y + dy, st.x + dx, st.I + dI, st.v, st.right.copy(),
                 st.t + h, st.t_cross.copy())
    xj = s.x_jump
    if xj is None:
        return new
    cross = st.right & (new.y <= xj)
    if not cross.any():
        return new
    idx = np.flatnonzero(cross)
    y0, v0, hh = st.y[idx], st.v[idx], h[idx]
    ones = np.ones(idx.size, dtype=bool)
    lo, hi = np.zeros_like(hh), hh.copy()
    while np.max(hi - lo) > CROSS_TOL:
        mid = 0.5 * (lo + hi)
        above = y0 + _rk4(s, y0, v0, ones, mid)[0] > xj
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    _, dx1, dI1 = _rk4(s, y0, v0, ones, hi)
    rest = hh - hi
    yj = np.full(idx.size, xj)
    dy2, dx2, dI2 = _rk4(s, yj, v0, ~ones, rest)
    new.y[idx] = xj + dy2
    new.x[idx] = st.x[idx] + dx1 + dx2
    new.I[idx] = st.I[idx] + dI1 + dI2
    new.right[idx] = False
    new.t_cross[idx] = st.t[idx] + hi
    return new


def _march_to(s: Scenario, st: _State, tau) -> _State:
    """Integrate each element from ``t = 0`` to its own end time ``tau``."""
    tau = np.broadcast_to(np.asarray(tau, dtype=float), st.y.shape)
    n = max(1, math.ceil(float(np.max(tau, initial=0.0)) / s.numerics.h - 1e-9))
    h = tau / n
    for _ in range(n):
        st = _step(s, st, h)
    st.t = tau.copy()
    return st


def _record(s: Scenario, xi, times):
    """Integrate all feet together, storing the state at each of ``times``.

    ``times`` must be nondecreasing and start at or after zero.  Returns
    arrays ``y, x, I, right`` of shape ``(len(times), len(xi))`` and the
    final state.
    """
    times = np.asarray(times, dtype=float)
    st = _State.start(s, xi)
    n = st.y.size
    Y, X, II = (np.empty((times.size, n)) for _ in range(3))
    R = np.empty((times.size, n), dtype=bool)
    t = 0.0
    for k, tk in enumerate(times):
        dt = tk - t
        if dt > 0:
            m = math.ceil(dt / s.numerics.h - 1e-9)
            for _ in range(m):
                st = _step(s, st, dt / m)
            t = tk
            st.t[:] = tk
        Y[k], X[k], II[k], R[k] = st.y, st.x, st.I, st.right
    return Y, X, II, R, st


# ----------------------------------------------------------- public traces

@dataclass(frozen=True)
class CharacteristicTrace:
    foot: float
    times: np.ndarray
    positions: np.ndarray
    v_const: float
    g: np.ndarray
    I_integral: np.ndarray
    crossed_jump_at: float | None
    x_euler: np.ndarray
    right: np.ndarray


def trace_forward(s: Scenario, xi: float, tau_end: float, times=None) -> CharacteristicTrace:
    """RK4 trace of one characteristic, sampled at every step (or ``times``)."""
    if tau_end > s.numerics.t_max:
        raise HorizonExceeded(f"tau_end {tau_end} exceeds t_max {s.numerics.t_max}")
    if times is None:
        n = max(1, math.ceil(tau_end / s.numerics.h - 1e-9))
        times = np.linspace(0.0, tau_end, n + 1)
    Y, X, II, R, st = _record(s, [xi], times)
    y, right = Y[:, 0], R[:, 0]
    v = float(st.v[0])
    g = s.density(y, v, right)
    tc = float(st.t_cross[0])
    return CharacteristicTrace(float(xi), np.asarray(times, dtype=float), y, v, g, II[:, 0],
                               None if math.isnan(tc) else tc, X[:, 0], right)


@dataclass
class Feet:
    """Batch result of :func:`find_feet`."""

    xi: np.ndarray
    v: np.ndarray
    y_end: np.ndarray
    x_end: np.ndarray
    I: np.ndarray
    right_end: np.ndarray
    t_cross: np.ndarray


def bracket_solve(evaluate, lo, hi, tol: float, max_iter: int = 200):
    """Vectorized root search for increasing scalar functions.

    ``evaluate(x, idx)`` returns ``(f, state)`` for the elements ``idx``,
    where ``state`` is a :class:`_State` (or anything with ``take``/``put``).
    The bracket ``[lo, hi]`` is widened by doubling until ``f(lo) <= 0 <=
    f(hi)``; the root is then located by Illinois false position with
    periodic bisection.  Returns ``(x, f, state)`` at the best iterate.
    """
    lo, hi = np.array(lo, dtype=float), np.array(hi, dtype=float)
    every = np.arange(lo.size)
    f_lo, st_lo = evaluate(lo, every)
    f_hi, st_hi = evaluate(hi, every)
    for _ in range(60):
        bad_lo = np.flatnonzero(f_lo > 0)
        bad_hi = np.flatnonzero(f_hi < 0)
        if bad_lo.size == 0 and bad_hi.size == 0:
            break
        for bad, upward in ((bad_lo, False), (bad_hi, True)):
            if bad.size == 0:
                continue
            w = np.maximum(hi[bad] - lo[bad], 1e-14 * (1.0 + np.abs(lo[bad])))
            if upward:
                lo[bad], f_lo[bad] = hi[bad], f_hi[bad]
                st_lo.put(bad, st_hi.take(bad))
                hi[bad] = hi[bad] + 2.0 * w
                f_new, st_new = evaluate(hi[bad], bad)
                f_hi[bad] = f_new
                st_hi.put(bad, st_new)
            else:
                hi[bad], f_hi[bad] = lo[bad], f_lo[bad]
                st_hi.put(bad, st_lo.take(bad))
                lo[bad] = lo[bad] - 2.0 * w
                f_new, st_new = evaluate(lo[bad], bad)
                f_lo[bad] = f_new
                st_lo.put(bad, st_new)
    else:
        raise BracketFailure("could not bracket the root")

    use_hi = np.abs(f_hi) < np.abs(f_lo)
    best_x = np.where(use_hi, hi, lo)
    f_best = np.where(use_hi, f_hi, f_lo)
    best = st_lo.copy()
    best.put(use_hi, st_hi.take(use_hi))
    done = np.abs(f_best) <= tol
    last = np.zeros(lo.size, dtype=np.int8)
    for it in range(max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        a, b, fa, fb = lo[act], hi[act], f_lo[act], f_hi[act]
        with np.errstate(divide="ignore", invalid="ignore"):
            xm = b - fb * (b - a) / (fb - fa)
        narrow = (b - a) <= 4e-16 * (1.0 + np.abs(b))
        bisect = ~((xm > a) & (xm < b)) | (it % 8 == 7)
        xm = np.where(bisect, 0.5 * (a + b), xm)
        fm, stm = evaluate(xm, act)
        better = np.abs(fm) < np.abs(f_best[act])
        bi = act[better]
        best.put(bi, stm.take(better))
        f_best[bi] = fm[better]
        best_x[bi] = xm[better]
        up = fm > 0
        hi_idx, lo_idx = act[up], act[~up]
        hi[hi_idx], f_hi[hi_idx] = xm[up], fm[up]
        lo[lo_idx], f_lo[lo_idx] = xm[~up], fm[~up]
        # Illinois: halve the stale end value when the same side repeats
        f_lo[hi_idx[last[hi_idx] == 1]] *= 0.5
        f_hi[lo_idx[last[lo_idx] == -1]] *= 0.5
        last[hi_idx], last[lo_idx] = 1, -1
        done[act] = (np.abs(f_best[act]) <= tol) | narrow
    else:
        raise BracketFailure("root iteration did not converge")
    return best_x, f_best, best


def find_feet(s: Scenario, y, tau, override: bool = False) -> Feet:
    """Vectorized foot search: ``xi`` with ``trace(xi, tau)`` ending at ``y``.

    The end point is increasing in the foot and ``mu <= 0`` makes ``xi = y``
    a lower bracket end.  The upper end starts at twice a frozen-speed guess.
    """
    y, tau = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(tau, dtype=float))
    y, tau = y.ravel().copy(), tau.ravel().copy()
    if np.any(tau < 0):
        raise ValueError("tau must be nonnegative")
    s.check_horizon(tau, override)
    out = _State.start(s, y)
    live = np.flatnonzero(tau > 0)
    if live.size == 0:
        return _feet(out)
    yl, tl = y[live], tau[live]

    def evaluate(xi, idx):
        st = _march_to(s, _State.start(s, xi), tl[idx])
        return st.y - yl[idx], st

    speed = np.abs(mu_field(s, yl, s.v0(yl), s.side_of(yl)))
    hi = yl + 2.0 * speed * tl + 1e-14 * (1.0 + np.abs(yl))
    _, _, best = bracket_solve(evaluate, yl, hi, s.numerics.tol_foot)
    out.put(live, best)
    return _feet(out)


def _feet(st: _State) -> Feet:
    return Feet(st.xi, st.v, st.y, st.x, st.I, st.right, st.t_cross)


def find_foot(s: Scenario, y: float, tau: float, override: bool = False):
    """Foot of the characteristic through ``(y, tau)`` and its trace."""
    xi = float(find_feet(s, y, tau, override).xi[0])
    return xi, trace_forward(s, xi, tau) if tau > 0 else trace_forward(s, xi, 0.0, [0.0])


# --------------------------------------------------------- Riccati formula

def alpha0(s: Scenario, xi):
    """``g0 p'(g0) v0'`` at the foot, using the side the foot starts on."""
    right = s.side_of(xi)
    g0 = s.g0_side(xi, right)
    return g0 * s.model.dp(g0) * s.dv0(xi)


def riccati_alpha(a0, I, delta_blow: float):
    """``alpha = a0 / (1 + a0 I)``; raises if the denominator is too small."""
    den = 1.0 + a0 * I
    if np.any(den <= delta_blow):
        raise BlowupReached(f"Riccati denominator {np.min(den):.3g} at or below {delta_blow}")
    return a0 / den


@dataclass(frozen=True)
class AlphaProfile:
    times: np.ndarray
    alpha: np.ndarray
    grad: np.ndarray


def alpha_along(s: Scenario, trace: CharacteristicTrace) -> AlphaProfile:
    """Closed-form ``alpha`` and ``J^-1 v_y = alpha / (g p'(g))`` along a trace."""
    a0 = alpha0(s, trace.foot)
    al = riccati_alpha(a0, trace.I_integral, s.numerics.delta_blow)
    return AlphaProfile(trace.times, al, al / (trace.g * s.model.dp(trace.g)))


# ------------------------------------------------------------- blow-up time

@dataclass(frozen=True)
class BlowupResult:
    feet: np.ndarray
    per_foot: np.ndarray
    T_b: float
    argmin_foot: float | None
    resolved: np.ndarray
    errors: dict = field(default_factory=dict)


def _blowup_batch(s: Scenario, xi, first_only: bool = False):
    """Blow-up time of each foot; ``inf`` when ``v0' >= 0``.

    Returns ``(T, resolved)``.  Unresolved entries hit ``t_max`` (or were
    skipped after the first blow-up when ``first_only``); they hold the
    last time reached.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _blowup_march(s, np.array(xi, dtype=float, ndmin=1), first_only)


def _blowup_march(s: Scenario, xi, first_only):
    a0 = alpha0(s, xi)
    T = np.full(xi.shape, np.inf)
    resolved = a0 >= 0
    act = np.flatnonzero(~resolved)
    if act.size == 0:
        return T, resolved
    target = -1.0 / a0[act]
    st = _State.start(s, xi[act])
    h = s.numerics.h
    t = 0.0
    while act.size and t < s.numerics.t_max - 1e-15:
        hs = min(h, s.numerics.t_max - t)
        prev = st
        st = _step(s, st, hs)
        hit = st.I >= target
        if hit.any():
            hidx = np.flatnonzero(hit)
            p = prev.take(hidx)
            tg = target[hidx]
            lo, hi = np.zeros(hidx.size), np.full(hidx.size, hs)
            tb_scale = t + hs
            while np.max(hi - lo) > 1e-10 * tb_scale:
                mid = 0.5 * (lo + hi)
                over = _step(s, p, mid).I >= tg
                hi = np.where(over, mid, hi)
                lo = np.where(over, lo, mid)
            T[act[hidx]] = t + 0.5 * (lo + hi)
            resolved[act[hidx]] = True
            keep = ~hit
            act, target, st = act[keep], target[keep], st.take(keep)
            if first_only:
                t += hs
                break
        t += hs
    T[act] = t
    return T, resolved


def blowup_time_for_foot(s: Scenario, xi: float) -> float:
    T, ok = _blowup_batch(s, [xi])
    if not ok[0]:
        raise HorizonExceeded(f"> T_max = {s.numerics.t_max}")
    return float(T[0])


def global_blowup_time(s: Scenario, foot_grid, first_only: bool = False,
                       xtol_frac: float = 1e-3) -> BlowupResult:
    """Minimum blow-up time over a foot grid, refined by golden section.

    With ``first_only`` the march stops at the first blow-up, which is all
    that is needed for the minimum; later feet are then left unresolved.
    """
    grid = np.asarray(foot_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty foot grid")
    T, resolved = _blowup_batch(s, grid, first_only)
    errors = {float(x): f"> T_max = {s.numerics.t_max}"
              for x, ok, t in zip(grid, resolved, T) if not ok and not first_only}
    Tm = np.where(resolved, T, np.inf)
    if not np.isfinite(Tm).any():
        return BlowupResult(grid, T, math.inf, None, resolved, errors)
    k = int(np.argmin(Tm))
    best_x, best_T = float(grid[k]), float(Tm[k])
    if 0 < k < grid.size - 1 and best_T < Tm[k - 1] and best_T < Tm[k + 1]:
        def f(x):
            tt, ok = _blowup_batch(s, [x])
            return float(tt[0]) if ok[0] else math.inf
        x_ref, t_ref = golden_section(f, float(grid[k - 1]), float(grid[k + 1]),
                                      xtol_frac * float(grid[k + 1] - grid[k - 1]))
        if t_ref < best_T:
            best_x, best_T = x_ref, t_ref
    return BlowupResult(grid, T, best_T, best_x, resolved, errors)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, a: float, b: float, xtol: float):
    """Minimize a unimodal ``f`` on ``[a, b]`` to an absolute ``xtol``."""
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)
