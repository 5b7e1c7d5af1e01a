from fractions import Fraction

import pytest

from platoon_match.scenario import make_scenario

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def pair():
    """Two vehicles with defaults 0 and 1, the standard economics."""
    return make_scenario([0, 1])


@pytest.fixture
def beta():
    return Fraction(105, 4)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
