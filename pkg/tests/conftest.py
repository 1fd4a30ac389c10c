import numpy as np
import pytest

from molphase.core import EmitterParams

ACCEPTANCE_LINES = []


@pytest.fixture
def emitter():
    return EmitterParams(gamma=21.0, eta=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
