import os

import pytest
from hypothesis import HealthCheck, settings

from armlab.config import Configuration

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


def two_columns(lattice="square", n=2, c=(0, 0)):
    """Columns ``x = c.x - 1`` and ``x = c.x + 1`` open, everything else closed."""
    return Configuration.from_function(n, lambda v: abs(v[0] - c[0]) == 1, 0.5, lattice)


@pytest.fixture
def acceptance_report():
    def report(number, name, passed, detail=""):
        line = f"criterion {number} {name}: {'PASS' if passed else 'FAIL'}"
        if detail:
            line += f" ({detail})"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def full_square_half():
    from armlab.oracle import enumerate_exact
    return enumerate_exact(1, 0.5, "square")
