"""Characteristic solver for the Aw-Rascle system with vanishing pressure."""
from .characteristics import Numerics, Scenario
from .errors import (AwRascleError, BlowupReached, BracketFailure, ConfigError, DegenerateFit,
                     HorizonExceeded, NonPositiveDensity, OutOfRange, OutsideWindow,
                     ScenarioRejected, VacuumEncountered)
from .initial_data import InitialData
from .pressure import GammaLaw, LogLaw, TabulatedLaw

__version__ = "0.1.0"
