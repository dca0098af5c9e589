"""Exception types shared across the package."""


class AwRascleError(Exception):
    """Base class for all package errors."""


class NonPositiveDensity(AwRascleError, ValueError):
    """A density argument was zero or negative."""


class OutOfRange(AwRascleError, ValueError):
    """A pressure value lies outside the range of the pressure law."""


class OutsideWindow(AwRascleError, ValueError):
    """Evaluation point lies outside the domain of a piecewise function."""


class VacuumEncountered(AwRascleError, ArithmeticError):
    """The recovered density would vanish."""


class ScenarioRejected(AwRascleError, ValueError):
    """Scenario inputs violate an admissibility requirement."""

    def __init__(self, message: str, jump: float | None = None, margin: float | None = None):
        super().__init__(message)
        self.jump = jump
        self.margin = margin


class BracketFailure(AwRascleError, RuntimeError):
    """A root could not be bracketed."""


class BlowupReached(AwRascleError, ArithmeticError):
    """A characteristic has reached its gradient blow-up time."""


class HorizonExceeded(AwRascleError, RuntimeError):
    """The requested time lies beyond the integration horizon."""


class DegenerateFit(AwRascleError, ValueError):
    """Not enough usable points for a least-squares rate fit."""


class ConfigError(AwRascleError, ValueError):
    """The configuration file or overrides are malformed."""
