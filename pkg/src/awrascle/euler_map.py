"""From Lagrangian labels back to the physical line.

``x(y, t) = y + int_0^t v(y, s) ds`` is evaluated by composite Simpson over
foot searches.  Two ways to sample at an Eulerian point are provided:

* :func:`sample_eulerian` inverts the flow map and samples the Lagrangian
  fields at the preimage;
* :func:`sample_eulerian_direct` finds the first-family characteristic that
  passes through ``(x, t)`` by a root search on its foot.  The tracer
  integrates ``dx/dt = lambda1`` alongside ``y``, so each evaluation is one
  batched trace.  This is the route used on large lattices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .characteristics import (Scenario, _march_to, _record, _State, alpha0, bracket_solve,
                              find_feet, riccati_alpha)
from .errors import BracketFailure
from .fields import sample_lagrangian_batch

SIDE_OFFSET = 1e-9


@dataclass(frozen=True)
class EulerSample:
    rho: float
    u: float
    u_x: float
    lambda1: float
    lambda2: float


@dataclass
class EulerSamples:
    x: np.ndarray
    t: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    u_x: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    y: np.ndarray
    right: np.ndarray

    def __getitem__(self, i) -> EulerSample:
        return EulerSample(float(self.rho[i]), float(self.u[i]), float(self.u_x[i]),
                           float(self.lambda1[i]), float(self.lambda2[i]))


def _panels(s: Scenario, t: float) -> int:
    n = max(2, math.ceil(s.numerics.n_quad * t))
    return n + (n % 2)


def flow_x_batch(s: Scenario, y, t, override: bool = False):
    """Vectorized flow map; returns ``(x, g_end)`` with ``g`` at ``(y, t)``."""
    y, t = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(t, dtype=float))
    y, t = y.ravel(), t.ravel()
    n = _panels(s, float(np.max(t, initial=0.0)))
    w = np.ones(n + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    frac = np.linspace(0.0, 1.0, n + 1)
    nodes = t[:, None] * frac[None, :]
    feet = find_feet(s, np.repeat(y, n + 1), nodes.ravel(), override)
    v = feet.v.reshape(y.size, n + 1)
    x = y + (t / n) / 3.0 * (v @ w)
    right = s.side_of(y)
    g = s.density(y, v[:, -1], right)
    return x, g


def flow_x(s: Scenario, y: float, tau: float, override: bool = False) -> float:
    """Eulerian position of the particle with label ``y`` at time ``tau``."""
    return float(flow_x_batch(s, y, tau, override)[0][0])


def flow_path(s: Scenario, y: float, t_grid, override: bool = False) -> np.ndarray:
    """``x(y, t)`` at every time of a uniform grid starting at 0.

    Uses one node set: each grid interval gets an even number of Simpson
    panels and the integral is accumulated interval by interval.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must start at 0 and increase")
    k = t_grid.size - 1
    if k == 0:
        return np.array([y], dtype=float)
    per = max(2, math.ceil(_panels(s, t_grid[-1]) / k))
    per += per % 2
    nodes = np.concatenate([np.linspace(a, b, per + 1)[:-1] for a, b in zip(t_grid[:-1], t_grid[1:])]
                           + [t_grid[-1:]])
    v = find_feet(s, np.full(nodes.shape, float(y)), nodes, override).v
    w = np.ones(per + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    seg = np.array([(t_grid[i + 1] - t_grid[i]) / per / 3.0 * (v[i * per:(i + 1) * per + 1] @ w)
                    for i in range(k)])
    return y + np.concatenate([[0.0], np.cumsum(seg)])


def _velocity_range(s: Scenario):
    a, b = s.window
    pad = b - a
    xs = np.linspace(a - pad, b + pad, 4 * s.numerics.grid_n)
    u = s.v0(xs)
    return float(np.min(u)), float(np.max(u))


def invert_x_batch(s: Scenario, x, t, override: bool = False) -> np.ndarray:
    """Labels ``y`` with ``flow_x(y, t) = x``.

    Since ``v`` takes values in the range of ``u0``, the preimage lies in
    ``[x - t max u0, x - t min u0]``.  Newton steps use ``dx/dy = J =
    g0/g``; steps leaving the bracket fall back to bisection.
    """
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    x, t = x.ravel().copy(), t.ravel().copy()
    y = x.copy()
    live = np.flatnonzero(t > 0)
    if live.size == 0:
        return y
    umin, umax = _velocity_range(s)
    xl, tl = x[live], t[live]
    lo = xl - tl * umax - 1e-12
    hi = xl - tl * umin + 1e-12
    cur = np.clip(xl - tl * s.v0(xl), lo, hi)
    tol = s.numerics.tol_foot
    act = np.arange(live.size)
    for _ in range(100):
        xv, g = flow_x_batch(s, cur[act], tl[act], override)
        f = xv - xl[act]
        ok = np.abs(f) <= tol
        lo[act] = np.where(f < 0, cur[act], lo[act])
        hi[act] = np.where(f > 0, cur[act], hi[act])
        J = s.g0_side(cur[act], s.side_of(cur[act])) / g
        nxt = cur[act] - f / J
        out = ~((nxt > lo[act]) & (nxt < hi[act]))
        nxt = np.where(out, 0.5 * (lo[act] + hi[act]), nxt)
        narrow = hi[act] - lo[act] <= 4e-16 * (1.0 + np.abs(cur[act]))
        cur[act] = np.where(ok, cur[act], nxt)
        act = act[~(ok | narrow)]
        if act.size == 0:
            break
    y[live] = cur
    return y


def invert_x(s: Scenario, x: float, t: float, y_bracket=None, override: bool = False) -> float:
    """Inverse flow map at one point; ``y_bracket`` is accepted for checking."""
    y = float(invert_x_batch(s, x, t, override)[0])
    if y_bracket is not None and not (y_bracket[0] <= y <= y_bracket[1]):
        raise BracketFailure(f"preimage {y} outside bracket {y_bracket}")
    return y


def _to_euler(s, x, t, y, right, v, g, grad):
    gdp = g * s.model.dp(g)
    return EulerSamples(x, t, g, v, grad, v - s.eps2 * gdp, v.copy(), y, right)


def sample_eulerian_batch(s: Scenario, x, t, override: bool = False) -> EulerSamples:
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    x, t = x.ravel(), t.ravel()
    y = invert_x_batch(s, x, t, override)
    smp = sample_lagrangian_batch(s, y, t, override)
    return _to_euler(s, x, t, y, s.side_of(y), smp.v, smp.g, smp.grad)


def sample_eulerian(s: Scenario, x: float, t: float, override: bool = False) -> EulerSample:
    """``(rho, u, u_x, lambda1, lambda2)`` at an Eulerian point."""
    return sample_eulerian_batch(s, x, t, override)[0]


def sample_eulerian_direct(s: Scenario, x, t, bracket=None, override: bool = False) -> EulerSamples:
    """Sample by finding the first-family characteristic through ``(x, t)``.

    ``bracket`` optionally gives starting foot intervals ``(lo, hi)`` per
    point; they are widened automatically if they miss the root.  The traced Eulerian
    position is increasing in the foot before blow-up, and ``lambda1 <= v
    <= max u0`` gives ``xi >= x - t max u0``.
    """
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    x, t = x.ravel().copy(), t.ravel().copy()
    s.check_horizon(t, override)
    if bracket is None:
        _, umax = _velocity_range(s)
        lo = x - t * umax - 1e-12
        hi = x - t * s.v0(x) + 1e-3 * (1.0 + t)
    else:
        lo = np.asarray(bracket[0], dtype=float).ravel().copy()
        hi = np.asarray(bracket[1], dtype=float).ravel().copy()

    def evaluate(xi, idx):
        st = _march_to(s, _State.start(s, xi), t[idx])
        return st.x - x[idx], st

    _, _, st = bracket_solve(evaluate, lo, hi, s.numerics.tol_foot)
    y, right, v = st.y, st.right, st.v
    g = s.density(y, v, right)
    a = riccati_alpha(alpha0(s, st.xi), st.I, s.numerics.delta_blow)
    grad = a / (g * s.model.dp(g))
    return _to_euler(s, x, t, y, right, v, g, grad)


# ------------------------------------------------------------------ curves

@dataclass(frozen=True)
class DiscontinuityCurve:
    t: np.ndarray
    x: np.ndarray
    u_minus: np.ndarray
    u_plus: np.ndarray
    rho_minus: np.ndarray
    rho_plus: np.ndarray
    slope: np.ndarray

    @property
    def slope_error(self) -> float:
        return float(np.max(np.abs(self.slope - 0.5 * (self.u_minus + self.u_plus))))

    @property
    def velocity_jump(self) -> float:
        return float(np.max(np.abs(self.u_plus - self.u_minus)))


def discontinuity_curve(s: Scenario, t_grid, override: bool = False) -> DiscontinuityCurve:
    """Image ``x2(t) = flow_x(x_jump, t)`` of the fixed Lagrangian jump.

    One-sided states are sampled at labels ``x_jump -+ 1e-9``.  The slope is
    a second-order finite difference of the sampled curve.
    """
    if s.x_jump is None:
        raise ValueError("scenario has no density jump")
    t_grid = np.asarray(t_grid, dtype=float)
    xj = s.x_jump
    uniform = t_grid[0] == 0.0 and np.allclose(np.diff(t_grid), t_grid[1] - t_grid[0])
    if uniform and t_grid.size > 1:
        x2 = flow_path(s, xj, t_grid, override)
    else:
        x2 = flow_x_batch(s, np.full(t_grid.shape, xj), t_grid, override)[0]
    ys = np.concatenate([np.full(t_grid.shape, xj - SIDE_OFFSET), np.full(t_grid.shape, xj + SIDE_OFFSET)])
    smp = sample_lagrangian_batch(s, ys, np.concatenate([t_grid, t_grid]), override)
    n = t_grid.size
    slope = np.gradient(x2, t_grid, edge_order=2) if n > 2 else np.full(n, np.nan)
    return DiscontinuityCurve(t_grid, x2, smp.v[:n], smp.v[n:], smp.g[:n], smp.g[n:], slope)


def char1_curve(s: Scenario, x_seed: float, t_seed: float, t_grid, override: bool = False) -> np.ndarray:
    """First-family characteristic ``x1(t; x_seed, t_seed)`` on ``t_grid``.

    The foot is found from the preimage label of the seed; the curve is the
    Eulerian track of that characteristic, integrated by RK4 together with
    its Lagrangian label.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    y_seed = invert_x(s, x_seed, t_seed, override=override)
    xi = float(find_feet(s, y_seed, t_seed, override).xi[0])
    times = np.union1d(t_grid, [0.0])
    _, X, _, _, _ = _record(s, [xi], times)
    return np.interp(t_grid, times, X[:, 0])


def triangle_width(s: Scenario, x_seed: float, t_seed: float, n_t: int = 101,
                   override: bool = False) -> float:
    """Largest gap on ``[0, t_seed]`` between the two characteristics through a point.

    The second-family characteristic is the particle path of the seed's
    label; the first-family one comes from :func:`char1_curve`.
    """
    t_grid = np.linspace(0.0, t_seed, n_t)
    x1 = char1_curve(s, x_seed, t_seed, t_grid, override)
    y_seed = invert_x(s, x_seed, t_seed, override=override)
    x2 = flow_path(s, y_seed, t_grid, override)
    return float(np.max(np.abs(x2 - x1)))


def characteristic_fan(s: Scenario, feet, times):
    """Eulerian positions ``X[k, i]`` of the characteristics from ``feet``."""
    _, X, _, _, _ = _record(s, feet, times)
    return X


def sample_eulerian_points(s: Scenario, x, t, n_fan: int = 2001, override: bool = False) -> EulerSamples:
    """Direct samples at many Eulerian points sharing a few time levels.

    A fan of characteristics recorded at the distinct times supplies a
    bracketing pair of feet for every point; :func:`sample_eulerian_direct`
    then solves for the exact foot.
    """
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    x, t = x.ravel(), t.ravel()
    s.check_horizon(t, override)
    times, inv = np.unique(t, return_inverse=True)
    umin, umax = _velocity_range(s)
    tmax = float(times[-1])
    lo_f = float(np.min(x)) - tmax * max(umax, 0.0) - 0.1
    hi_f = float(np.max(x)) - tmax * min(umin, 0.0) + 0.5
    feet = np.linspace(lo_f, hi_f, n_fan)
    if s.x_jump is not None and lo_f < s.x_jump < hi_f:
        feet = np.union1d(feet, [s.x_jump])
    X = characteristic_fan(s, feet, np.union1d(times, [0.0]))
    X = X[np.searchsorted(np.union1d(times, [0.0]), times)]
    lo, hi = np.empty_like(x), np.empty_like(x)
    for k in range(times.size):
        m = inv == k
        idx = np.clip(np.searchsorted(X[k], x[m]), 1, feet.size - 1)
        lo[m], hi[m] = feet[idx - 1], feet[idx]
    return sample_eulerian_direct(s, x, t, bracket=(lo, hi), override=override)
