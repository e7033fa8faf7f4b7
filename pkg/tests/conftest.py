import math

import pytest
from hypothesis import settings

from alphamodels.spectral import build_lattice

settings.register_profile("ci", max_examples=25, deadline=None, derandomize=True)
settings.load_profile("ci")

TWO_PI = 2 * math.pi


@pytest.fixture(scope="session")
def lat16():
    return build_lattice(TWO_PI, 16)


@pytest.fixture(scope="session")
def lat32():
    return build_lattice(TWO_PI, 32)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
