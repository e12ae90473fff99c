import pytest

from moranmf.model import LevelSchedule, ModelParams

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def p0():
    return ModelParams(16.0, 2.2, 0.4, 0.45, LevelSchedule.two_pow_i_squared(8))


@pytest.fixture(scope="session")
def p0_factorial():
    return ModelParams(16.0, 2.2, 0.4, 0.45, LevelSchedule.factorial(8))


@pytest.fixture
def acceptance_report():
    return ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
