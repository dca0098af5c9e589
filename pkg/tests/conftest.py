import sys

import numpy as np
import pytest

from awrascle import initial_data as idt
from awrascle.characteristics import Scenario
from awrascle.pressure import GammaLaw, LogLaw


def scenario(model, u0, g0, eps=0.1, **kw):
    return Scenario(model, idt.InitialData(u0, g0), eps, **kw)


def default_data():
    return idt.InitialData(idt.neg_tanh(), idt.step(0.0, 1.0, 2.0))


@pytest.fixture(scope="session")
def log_default():
    return Scenario(LogLaw(), default_data(), 0.1)


@pytest.fixture(scope="session")
def gamma_default():
    return Scenario(GammaLaw(1.0), default_data(), 0.1)


@pytest.fixture(scope="session")
def log_linear():
    """LogLaw with u0 = -y and unit density: every foot blows up at t = 1."""
    return scenario(LogLaw(), idt.linear(-1.0), idt.constant(1.0))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
