"""Closed-form solution of the pressureless limit.

Without pressure every particle keeps its initial velocity, so labels move on
straight lines ``x = y + u0(y) t`` until neighbouring lines meet.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .characteristics import golden_section
from .errors import BlowupReached
from .initial_data import InitialData

DELTA_BLOW = 1e-6


@dataclass(frozen=True, eq=False)
class PressurelessSolution:
    data: InitialData
    window: tuple[float, float] = (-5.0, 5.0)
    n_grid: int = 4096
    fd_step: float = 1e-6
    min_du0: float = field(init=False)
    argmin_du0: float = field(init=False)

    def __post_init__(self):
        a, b = self.window
        xs = np.linspace(a, b, self.n_grid)
        d = self.du0(xs)
        k = int(np.argmin(d))
        x_best, d_best = float(xs[k]), float(d[k])
        if 0 < k < xs.size - 1:
            x_ref, d_ref = golden_section(lambda x: float(self.du0(x)), float(xs[k - 1]),
                                          float(xs[k + 1]), 1e-10)
            if d_ref <= d_best:
                x_best, d_best = x_ref, d_ref
        object.__setattr__(self, "min_du0", d_best)
        object.__setattr__(self, "argmin_du0", x_best)

    def u0(self, y):
        return self.data.u0.segments[0](np.asarray(y, dtype=float))

    def du0(self, y):
        f = self.data.u0
        if f.derivatives is not None:
            return f.segment_derivative(0, np.asarray(y, dtype=float))
        return f.segment_derivative(0, np.asarray(y, dtype=float), self.fd_step)


def fields_bar(sol: PressurelessSolution, y, t, delta_blow: float = DELTA_BLOW):
    """Return ``(g_bar, v_bar, J_bar, u_x_bar)`` at label ``y`` and time ``t``."""
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    d = sol.du0(y)
    J = 1.0 + d * t
    if np.any(J <= delta_blow):
        raise BlowupReached(f"J_bar = {np.min(J):.3g} at or below {delta_blow}")
    g = sol.data.g0(y) / J
    v = np.broadcast_to(sol.u0(y), J.shape).astype(float)
    ux = d / J
    if np.ndim(J) == 0:
        return float(g), float(v), float(J), float(ux)
    return g, v, J, ux


def blowup_time_bar(sol: PressurelessSolution) -> float:
    """``-1 / min u0'``, or infinity when ``u0`` is nondecreasing."""
    return math.inf if sol.min_du0 >= 0 else -1.0 / sol.min_du0


def discontinuity_bar(sol: PressurelessSolution, x0: float, t_grid) -> np.ndarray:
    """Straight particle path ``x0 + u0(x0) t``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid >= blowup_time_bar(sol)):
        raise BlowupReached("time grid reaches the pressureless blow-up time")
    return x0 + float(sol.u0(x0)) * t_grid


def tau_M_bar(sol: PressurelessSolution, M: float, T: float) -> float:
    """Closed form of the level-set time.

    ``u0'/(1 + u0' t)`` is increasing in ``u0'``, so the infimum over labels
    sits at ``min u0'``; solving ``-a/(1 - a t) = -M`` gives ``1/a - 1/M``.
    """
    if M <= 0:
        raise ValueError("M must be positive")
    a = -sol.min_du0
    if a <= 0:
        return float(T)
    return float(min(T, max(0.0, 1.0 / a - 1.0 / M)))


def label_of(sol: PressurelessSolution, x, t, iters: int = 200) -> np.ndarray:
    """Solve ``y + u0(y) t = x`` by vectorized bisection (valid before blow-up)."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    a, b = sol.window
    pad = b - a
    xs = np.linspace(a - pad, b + pad, 4 * sol.n_grid)
    u = sol.u0(xs)
    umin, umax = float(np.min(u)), float(np.max(u))
    lo = x - t * umax - 1e-12
    hi = x - t * umin + 1e-12
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f = mid + sol.u0(mid) * t - x
        lo = np.where(f < 0, mid, lo)
        hi = np.where(f < 0, hi, mid)
        if np.all(hi - lo <= 4e-16 * (1.0 + np.abs(mid))):
            break
    return 0.5 * (lo + hi)


def eulerian_bar(sol: PressurelessSolution, x, t):
    """``(rho_bar, u_bar, u_x_bar)`` at Eulerian points."""
    y = label_of(sol, x, t)
    g, v, _, ux = fields_bar(sol, y, np.broadcast_to(t, np.shape(y)))
    return g, v, ux
