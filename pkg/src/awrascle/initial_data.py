"""Piecewise-Lipschitz initial data and the checks made on it.

A :class:`PiecewiseLipschitzFn` is a list of jump points together with one
evaluator per interval.  Every evaluator is defined on the whole line, so a
segment can be continued past its own interval; the characteristic tracer
relies on that when a Runge-Kutta stage pokes across a jump.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import OutsideWindow
from .pressure import PressureModel

STRICT_TOL = 1e-12
N_COND = 4096

Segment = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class PiecewiseLipschitzFn:
    """Scalar function with finitely many first-kind jumps.

    Attributes
    ----------
    jumps : tuple of float
        Increasing jump locations.
    segments : tuple of callables
        ``len(jumps) + 1`` vectorized evaluators, one per interval.
    derivatives : tuple of callables or None
        Exact segment derivatives when known; otherwise finite differences.
    domain : (float, float)
        Points outside raise :class:`OutsideWindow`.
    label : str
        Human-readable description used in configs and digests.
    """

    jumps: tuple[float, ...]
    segments: tuple[Segment, ...]
    derivatives: tuple[Segment, ...] | None = None
    domain: tuple[float, float] = (-np.inf, np.inf)
    label: str = ""

    def __post_init__(self):
        if len(self.segments) != len(self.jumps) + 1:
            raise ValueError("need one segment per interval")
        if any(b <= a for a, b in zip(self.jumps, self.jumps[1:])):
            raise ValueError("jumps must be strictly increasing")

    @property
    def one_sided(self) -> tuple[tuple[float, float], ...]:
        return tuple(
            (float(self.segments[i](np.array(x))), float(self.segments[i + 1](np.array(x))))
            for i, x in enumerate(self.jumps)
        )

    def segment_index(self, x, side: str = "auto"):
        j = np.asarray(self.jumps, dtype=float)
        how = "left" if side == "left" else "right"
        return np.searchsorted(j, x, side=how)

    def __call__(self, x, side: str = "auto"):
        xa = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if np.any((xa < lo) | (xa > hi)):
            raise OutsideWindow(f"point outside [{lo}, {hi}]")
        if not self.jumps:
            out = np.broadcast_to(self.segments[0](xa), xa.shape).astype(float)
        else:
            idx = self.segment_index(xa, side)
            out = np.empty(xa.shape, dtype=float)
            for i, seg in enumerate(self.segments):
                m = idx == i
                if np.any(m):
                    out[m] = seg(xa[m])
        return float(out) if np.ndim(x) == 0 else out

    def derivative(self, x, side: str = "auto", h: float = 1e-6):
        """Derivative within the segment selected by ``side``."""
        xa = np.asarray(x, dtype=float)
        idx = np.broadcast_to(self.segment_index(xa, side), xa.shape)
        out = np.empty(xa.shape, dtype=float)
        for i in range(len(self.segments)):
            m = idx == i
            if np.any(m):
                out[m] = self.segment_derivative(i, xa[m], h)
        return float(out) if np.ndim(x) == 0 else out

    def segment_derivative(self, i: int, x, h: float = 1e-6):
        if self.derivatives is not None:
            return np.broadcast_to(self.derivatives[i](x), np.shape(x)).astype(float)
        seg = self.segments[i]
        return (seg(x + h) - seg(x - h)) / (2.0 * h)


def eval(f: PiecewiseLipschitzFn, x, side: str = "auto"):  # noqa: A001
    """One-sided value at jumps, ordinary value elsewhere."""
    if side not in ("left", "right", "auto"):
        raise ValueError(f"side must be left, right or auto, got {side!r}")
    return f(x, side)


# ---------------------------------------------------------------- builders

def _const_fn(c: float) -> Segment:
    return lambda x: np.full(np.shape(x), c, dtype=float)


def constant(c: float) -> PiecewiseLipschitzFn:
    return PiecewiseLipschitzFn((), (_const_fn(c),), (_const_fn(0.0),), label=f"const({c!r})")


def linear(a: float, b: float = 0.0) -> PiecewiseLipschitzFn:
    """``a*x + b``."""
    return PiecewiseLipschitzFn((), (lambda x: a * np.asarray(x) + b,), (_const_fn(a),),
                                label=f"linear({a!r},{b!r})")


def tanh(amp: float = 1.0, k: float = 1.0, x0: float = 0.0) -> PiecewiseLipschitzFn:
    """``amp * tanh(k (x - x0))``."""
    f = lambda x: amp * np.tanh(k * (np.asarray(x) - x0))
    df = lambda x: amp * k / np.cosh(k * (np.asarray(x) - x0)) ** 2
    return PiecewiseLipschitzFn((), (f,), (df,), label=f"tanh({amp!r},{k!r},{x0!r})")


def neg_tanh(amp: float = 1.0, k: float = 1.0, x0: float = 0.0) -> PiecewiseLipschitzFn:
    """``-amp * tanh(k (x - x0))``."""
    f = tanh(-amp, k, x0)
    return PiecewiseLipschitzFn((), f.segments, f.derivatives, label=f"neg_tanh({amp!r},{k!r},{x0!r})")


def gauss_bump(amp: float = 1.0, center: float = 0.0, width: float = 1.0, base: float = 0.0) -> PiecewiseLipschitzFn:
    """``base + amp * exp(-((x - center)/width)**2)``."""
    f = lambda x: base + amp * np.exp(-(((np.asarray(x) - center) / width) ** 2))
    df = lambda x: -2.0 * amp * (np.asarray(x) - center) / width**2 * np.exp(-(((np.asarray(x) - center) / width) ** 2))
    return PiecewiseLipschitzFn((), (f,), (df,), label=f"gauss_bump({amp!r},{center!r},{width!r},{base!r})")


def step(x0: float, left: float, right: float) -> PiecewiseLipschitzFn:
    return PiecewiseLipschitzFn((float(x0),), (_const_fn(left), _const_fn(right)),
                                (_const_fn(0.0), _const_fn(0.0)), label=f"step({x0!r},{left!r},{right!r})")


def from_table(xs: Sequence[float], vs: Sequence[float], label: str = "table") -> PiecewiseLipschitzFn:
    """Linear interpolation of samples; a repeated abscissa marks a jump.

    Beyond the first and last sample the function is constant.
    """
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if xs.size < 2 or np.any(np.diff(xs) < 0):
        raise ValueError("table abscissae must be nondecreasing with at least two rows")
    cut = np.flatnonzero(np.diff(xs) == 0)
    jumps = tuple(float(xs[i]) for i in cut)
    bounds = np.concatenate([[0], cut + 1, [xs.size]])
    segs = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        px, pv = xs[a:b].copy(), vs[a:b].copy()
        if px.size == 1:
            segs.append(_const_fn(float(pv[0])))
        else:
            segs.append(lambda x, px=px, pv=pv: np.interp(x, px, pv))
    return PiecewiseLipschitzFn(jumps, tuple(segs), label=label)


def from_csv(path: str | Path) -> PiecewiseLipschitzFn:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                continue
    if not rows:
        raise ValueError(f"no numeric rows in {path}")
    x, v = zip(*rows)
    return from_table(x, v, label=f"table:{path}")


_EXPRESSIONS = {
    "const": constant,
    "linear": linear,
    "neg_tanh": neg_tanh,
    "tanh": tanh,
    "gauss_bump": gauss_bump,
}


def parse_function(spec: str, base_dir: str | Path | None = None) -> PiecewiseLipschitzFn:
    """Parse ``expr:<name>(args)``, ``step:<x0>,<l>,<r>`` or ``table:<path>``."""
    spec = spec.strip()
    kind, _, rest = spec.partition(":")
    rest = rest.strip()
    if kind == "expr":
        m = re.fullmatch(r"(\w+)\s*\((.*)\)", rest)
        name, args = (m.group(1), m.group(2)) if m else (rest, "")
        if name not in _EXPRESSIONS:
            raise ValueError(f"unknown expression {name!r}")
        vals = [float(a) for a in args.split(",") if a.strip()]
        f = _EXPRESSIONS[name](*vals)
        return f
    if kind == "step":
        vals = [float(a) for a in rest.split(",")]
        if len(vals) != 3:
            raise ValueError("step needs x0,left,right")
        return step(*vals)
    if kind == "table":
        path = Path(rest)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return from_csv(path)
    raise ValueError(f"cannot parse function {spec!r}")


# ------------------------------------------------------------ initial data

@dataclass(frozen=True, eq=False)
class InitialData:
    u0: PiecewiseLipschitzFn
    g0: PiecewiseLipschitzFn

    def __post_init__(self):
        if self.u0.jumps:
            raise ValueError("u0 must be Lipschitz (no jumps)")


@dataclass(frozen=True)
class ConditionVerdict:
    jump: float
    kind: str
    holds: bool
    margin: float


def riemann_invariant_initial(data: InitialData, model: PressureModel, eps: float) -> PiecewiseLipschitzFn:
    """``Z0 = u0 + eps**2 p(g0)`` segment by segment."""
    e2 = eps * eps
    u = data.u0.segments[0]
    du = data.u0.derivatives[0] if data.u0.derivatives else None
    segs, ders = [], []
    for i, g in enumerate(data.g0.segments):
        segs.append(lambda x, g=g: u(x) + e2 * model.p(g(x)))
        if du is not None and data.g0.derivatives is not None:
            dg = data.g0.derivatives[i]
            ders.append(lambda x, g=g, dg=dg: du(x) + e2 * model.dp(g(x)) * dg(x))
    return PiecewiseLipschitzFn(data.g0.jumps, tuple(segs), tuple(ders) if ders else None,
                                data.g0.domain, label=f"Z0[{data.u0.label},{data.g0.label}]")


def _increasing_jumps(data: InitialData, window):
    out = []
    for x, (l, r) in zip(data.g0.jumps, data.g0.one_sided):
        if window[0] <= x < window[1] and l < r:
            out.append((x, l))
    return out


def check_epsilon_condition(data: InitialData, model: PressureModel, eps: float, window,
                            n_cond: int = N_COND) -> list[ConditionVerdict]:
    """Check ``u0(xi) + eps^2 p(g0(xi-)) > u0(x)`` for ``x > xi``.

    The gap is continuous up to ``x = xi`` where it equals
    ``eps^2 p(g0(xi-))``, so the grid includes that limit point.
    """
    out = []
    for x, left in _increasing_jumps(data, window):
        xs = np.linspace(x, window[1], n_cond + 1)
        gap = data.u0(x) + eps * eps * model.p(left) - data.u0(xs)
        margin = float(np.min(gap))
        out.append(ConditionVerdict(x, "eps", margin > STRICT_TOL, margin))
    return out


def check_zero_condition(data: InitialData, window, n_cond: int = N_COND) -> list[ConditionVerdict]:
    """Check ``u0(xi) > u0(x)`` for ``x > xi``.

    Here the gap tends to zero as ``x -> xi``, so only grid points strictly
    right of the jump enter the infimum.
    """
    out = []
    for x, _ in _increasing_jumps(data, window):
        xs = np.linspace(x, window[1], n_cond + 1)[1:]
        margin = float(np.min(data.u0(x) - data.u0(xs)))
        out.append(ConditionVerdict(x, "zero", margin > STRICT_TOL, margin))
    return out


def lipschitz_constant(f: PiecewiseLipschitzFn, window, n: int = N_COND) -> float:
    """Largest finite-difference slope between neighbours in one segment."""
    xs = np.linspace(window[0], window[1], n)
    idx = f.segment_index(xs, "right")
    best = 0.0
    for i, seg in enumerate(f.segments):
        # grid points of this segment plus the segment's one-sided endpoints
        pts = xs[idx == i]
        if i > 0 and window[0] <= f.jumps[i - 1] <= window[1]:
            pts = np.concatenate([[f.jumps[i - 1]], pts])
        if i < len(f.jumps) and window[0] <= f.jumps[i] <= window[1]:
            pts = np.concatenate([pts, [f.jumps[i]]])
        pts = np.unique(pts)
        if pts.size < 2:
            continue
        vals = seg(pts)
        best = max(best, float(np.max(np.abs(np.diff(vals) / np.diff(pts)))))
    return best


def bound_constants(data: InitialData, model: PressureModel, eps: float, window,
                    n: int = N_COND) -> tuple[float, float, float]:
    """Return ``(A1, A2, B)``.

    ``A1``/``A2`` are the extreme densities on the window including one-sided
    values; ``B = sup (Z0_C')_+ / g0`` with the slope taken segment-wise.
    """
    xs = np.linspace(window[0], window[1], n)
    g = data.g0(xs)
    vals = [g]
    for x, (l, r) in zip(data.g0.jumps, data.g0.one_sided):
        if window[0] <= x <= window[1]:
            vals.append(np.array([l, r]))
    allg = np.concatenate(vals)
    z0 = riemann_invariant_initial(data, model, eps)
    idx = z0.segment_index(xs, "right")
    B = 0.0
    for i, seg in enumerate(z0.segments):
        pts = xs[idx == i]
        if i > 0 and window[0] <= z0.jumps[i - 1] <= window[1]:
            pts = np.concatenate([[z0.jumps[i - 1]], pts])
        if i < len(z0.jumps) and window[0] <= z0.jumps[i] <= window[1]:
            pts = np.concatenate([pts, [z0.jumps[i]]])
        pts = np.unique(pts)
        if pts.size < 2:
            continue
        slope = np.diff(seg(pts)) / np.diff(pts)
        mid = 0.5 * (pts[1:] + pts[:-1])
        gseg = data.g0.segments[i](mid)
        B = max(B, float(np.max(np.maximum(slope, 0.0) / gseg)))
    return float(np.min(allg)), float(np.max(allg)), B
