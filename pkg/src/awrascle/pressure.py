"""Pressure laws p(rho) and the curvature functional I.

Two closed-form laws are built in, ``p = rho**gamma`` and ``p = ln(rho)``,
and a tabulated law interpolated by a monotone cubic.  All evaluators accept
scalars or numpy arrays.  The small-pressure scaling ``eps**2`` is applied by
callers, never here.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import PchipInterpolator

from .errors import NonPositiveDensity, OutOfRange

TOL_INV = 1e-12


class LimitClass(enum.Enum):
    FINITE_ZERO = "FiniteZero"
    MINUS_INFINITY = "MinusInfinity"


def _check_positive(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise NonPositiveDensity(f"density must be positive, got min {np.min(rho)!r}")
    return rho


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


class PressureModel:
    """Base class for a pressure law.

    Subclasses implement ``_p``, ``_dp``, ``_d2p`` on validated positive
    arrays.  ``_inverse`` may be overridden with a closed form; the default is
    a safeguarded Newton iteration.
    """

    limit_class: LimitClass
    kind: str

    def p(self, rho):
        return _out(self._p(_check_positive(rho)), rho)

    def dp(self, rho):
        return _out(self._dp(_check_positive(rho)), rho)

    def d2p(self, rho):
        return _out(self._d2p(_check_positive(rho)), rho)

    def curvature(self, rho):
        return _out(self._curvature(_check_positive(rho)), rho)

    def inverse(self, q, tol: float = TOL_INV):
        qa = np.asarray(q, dtype=float)
        if self.limit_class is LimitClass.FINITE_ZERO and np.any(~(qa > self.p_floor)):
            raise OutOfRange(f"pressure value {np.min(qa)!r} is not above p(0+) = {self.p_floor}")
        if np.any(~np.isfinite(qa)):
            raise OutOfRange("pressure value is not finite")
        return _out(self._inverse(qa, tol), q)

    @property
    def p_floor(self) -> float:
        """Infimum of p over positive densities."""
        return 0.0 if self.limit_class is LimitClass.FINITE_ZERO else -np.inf

    def _curvature(self, rho):
        dp = self._dp(rho)
        return (2.0 * rho * dp + rho**2 * self._d2p(rho)) / (rho * dp) ** 2

    def _inverse(self, q, tol):
        return newton_inverse(self, q, tol)

    def config_string(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class GammaLaw(PressureModel):
    """``p(rho) = rho**gamma`` with ``gamma >= 1``."""

    gamma: float
    limit_class: LimitClass = field(default=LimitClass.FINITE_ZERO, init=False)
    kind: str = field(default="GammaLaw", init=False)

    def __post_init__(self):
        if not self.gamma >= 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")

    def _p(self, rho):
        return rho**self.gamma

    def _dp(self, rho):
        return self.gamma * rho ** (self.gamma - 1.0)

    def _d2p(self, rho):
        return self.gamma * (self.gamma - 1.0) * rho ** (self.gamma - 2.0)

    def _curvature(self, rho):
        return (self.gamma + 1.0) / (self.gamma * rho**self.gamma)

    def _inverse(self, q, tol):
        return q ** (1.0 / self.gamma)

    def config_string(self) -> str:
        return f"gamma:{self.gamma!r}"


@dataclass(frozen=True)
class LogLaw(PressureModel):
    """``p(rho) = ln(rho)``."""

    limit_class: LimitClass = field(default=LimitClass.MINUS_INFINITY, init=False)
    kind: str = field(default="LogLaw", init=False)

    def _p(self, rho):
        return np.log(rho)

    def _dp(self, rho):
        return 1.0 / rho

    def _d2p(self, rho):
        return -1.0 / rho**2

    def _curvature(self, rho):
        return np.ones_like(rho)

    def _inverse(self, q, tol):
        return np.exp(q)

    def config_string(self) -> str:
        return "log"


class TabulatedLaw(PressureModel):
    """Monotone cubic interpolant of sampled ``(rho, p)`` pairs.

    Outside the table the law continues linearly with the end slopes.  The
    values are shifted so that the continuation reaches ``p = 0`` at
    ``rho = 0``, which places every table in the finite-zero class.
    """

    limit_class = LimitClass.FINITE_ZERO
    kind = "Tabulated"

    def __init__(self, rho, p, source: str | None = None):
        rho = np.asarray(rho, dtype=float)
        p = np.asarray(p, dtype=float)
        order = np.argsort(rho)
        rho, p = rho[order], p[order]
        if rho.size < 2 or np.any(np.diff(rho) <= 0):
            raise ValueError("table needs at least two distinct density samples")
        if rho[0] < 0:
            raise ValueError("table densities must be nonnegative")
        self._spline = PchipInterpolator(rho, p, extrapolate=False)
        self._d1 = self._spline.derivative(1)
        self._d2 = self._spline.derivative(2)
        self._lo, self._hi = float(rho[0]), float(rho[-1])
        self._slope_lo = float(self._d1(self._lo))
        self._slope_hi = float(self._d1(self._hi))
        p_lo = float(p[0])
        self._shift = -(p_lo - self._slope_lo * self._lo)
        self.samples = (tuple(rho.tolist()), tuple((p + self._shift).tolist()))
        self.source = source

    @classmethod
    def from_csv(cls, path: str | Path) -> "TabulatedLaw":
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    continue  # header line
        if not rows:
            raise ValueError(f"no numeric rows in {path}")
        r, p = zip(*rows)
        return cls(r, p, source=str(path))

    def _p(self, rho):
        out = np.empty_like(rho)
        lo, hi = rho < self._lo, rho > self._hi
        mid = ~(lo | hi)
        out[mid] = self._spline(rho[mid])
        out[lo] = self._spline(self._lo) + self._slope_lo * (rho[lo] - self._lo)
        out[hi] = self._spline(self._hi) + self._slope_hi * (rho[hi] - self._hi)
        return out + self._shift

    def _dp(self, rho):
        out = np.where(rho < self._lo, self._slope_lo, self._slope_hi)
        mid = (rho >= self._lo) & (rho <= self._hi)
        out = np.array(out, dtype=float)
        out[mid] = self._d1(rho[mid])
        return out

    def _d2p(self, rho):
        out = np.zeros_like(rho)
        mid = (rho >= self._lo) & (rho <= self._hi)
        out[mid] = self._d2(rho[mid])
        return out

    def config_string(self) -> str:
        return f"table:{self.source}" if self.source else f"table:{self.samples!r}"

    def __eq__(self, other):
        return isinstance(other, TabulatedLaw) and self.samples == other.samples

    def __hash__(self):
        return hash(self.samples)

    def __repr__(self):
        return f"TabulatedLaw(n={len(self.samples[0])}, source={self.source!r})"


def newton_inverse(model: PressureModel, q, tol: float = TOL_INV, max_iter: int = 200):
    """Solve ``p(rho) = q`` elementwise by Newton steps kept inside a bracket.

    The bracket starts at ``[1, 1]`` and is doubled or halved until it contains
    the root; any Newton step that leaves it is replaced by a bisection step.
    """
    shape = np.shape(q)
    q = np.atleast_1d(np.asarray(q, dtype=float)).ravel()
    lo = np.ones_like(q)
    hi = np.ones_like(q)
    for _ in range(2100):
        need_lo = model._p(lo) > q
        need_hi = model._p(hi) < q
        if not (need_lo.any() or need_hi.any()):
            break
        lo = np.where(need_lo, lo * 0.5, lo)
        hi = np.where(need_hi, hi * 2.0, hi)
    else:
        raise OutOfRange("could not bracket the inverse pressure")
    if np.any(lo == 0) or np.any(~np.isfinite(hi)):
        raise OutOfRange("inverse pressure bracket degenerated")
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        f = model._p(x) - q
        lo = np.where(f < 0, x, lo)
        hi = np.where(f > 0, x, hi)
        step = f / model._dp(x)
        x_new = x - step
        bad = ~((x_new > lo) & (x_new < hi))
        x_new = np.where(bad, 0.5 * (lo + hi), x_new)
        done = np.abs(x_new - x) <= tol * np.abs(x_new)
        x = x_new
        if done.all():
            break
    return x.reshape(shape)


def bisection_inverse(model: PressureModel, q: float, lo: float, hi: float, tol: float = 1e-15) -> float:
    """Plain bisection for ``p(rho) = q`` on a given bracket."""
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if model.p(mid) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return 0.5 * (lo + hi)


def evaluate(model: PressureModel, rho):
    """Return ``(p, p', p'')`` at ``rho``."""
    return model.p(rho), model.dp(rho), model.d2p(rho)


def p_inverse(model: PressureModel, q, tol: float = TOL_INV):
    return model.inverse(q, tol)


def curvature_I(model: PressureModel, rho):
    """``I(rho) = (2 rho p' + rho^2 p'') / (rho p')^2``."""
    return model.curvature(rho)


@dataclass(frozen=True)
class AdmissibilityReport:
    range_checked: tuple[float, float]
    violations: list
    passed: bool


def validate_admissibility(model: PressureModel, rho_range, n_samples: int = 100) -> AdmissibilityReport:
    """Sample ``p' > 0`` and ``2p' + rho p'' > 0`` on a uniform grid."""
    a, b = float(rho_range[0]), float(rho_range[1])
    if not (0 < a <= b) or n_samples < 2:
        raise ValueError("need a positive range and at least two samples")
    rho = np.linspace(a, b, n_samples)
    dp = model._dp(rho)
    second = 2.0 * dp + rho * model._d2p(rho)
    violations = [(float(r), "p'") for r in rho[~(dp > 0)]]
    violations += [(float(r), "2p'+rho p''") for r in rho[~(second > 0)]]
    return AdmissibilityReport((a, b), violations, not violations)


def check_blowup_conditions(model: PressureModel, delta: float = 0.5,
                            cutoffs=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
                            growth_factor: float = 10.0, n_monotone: int = 2000,
                            rho_max: float | None = None) -> tuple[bool, bool]:
    """Test the two structural conditions on ``I`` near vacuum.

    Returns ``(monotone_I, integral_diverges)``.  Monotonicity is read as
    nondecreasing and sampled on a log grid over ``(min(cutoffs), rho_max]``.
    Divergence of ``int_c^delta I(s)/s**2 ds`` is declared when the partial
    integral grows by more than ``growth_factor`` across the last two cutoff
    decades.
    """
    cut = np.asarray(sorted(cutoffs, reverse=True), dtype=float)
    if delta <= 0 or cut.size < 3 or np.any(cut <= 0):
        raise ValueError("need delta > 0 and at least three positive cutoffs")
    top = delta if rho_max is None else rho_max
    rho = np.geomspace(cut[-1], top, n_monotone)
    vals = model._curvature(rho)
    monotone = bool(np.all(np.diff(vals) >= -1e-12 * np.abs(vals[:-1])))

    def partial(c):
        # substitute s = exp(w): ds/s^2 = exp(-w) dw
        w = np.linspace(np.log(c), np.log(delta), 4001)
        s = np.exp(w)
        return float(simpson(model._curvature(s) / s, x=w))

    f_last, f_prev2 = partial(cut[-1]), partial(cut[-3])
    diverges = bool(f_prev2 > 0 and f_last > growth_factor * f_prev2)
    return monotone, diverges


def from_config(value: str, base_dir: str | Path | None = None) -> PressureModel:
    """Build a law from ``gamma:<g>``, ``log`` or ``table:<path>``."""
    value = value.strip()
    if value == "log":
        return LogLaw()
    if value.startswith("gamma:"):
        return GammaLaw(float(value.split(":", 1)[1]))
    if value.startswith("table:"):
        path = Path(value.split(":", 1)[1].strip())
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return TabulatedLaw.from_csv(path)
    raise ValueError(f"unknown pressure law {value!r}")
