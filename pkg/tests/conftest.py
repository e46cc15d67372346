import numpy as np
import pytest

from dsrl.network import generate_network


@pytest.fixture(scope="session")
def ref_net():
    return generate_network(11, 31, 3, 3.0, 1.75, 2, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: l.split("] ", 1)[1]):
            terminalreporter.write_line(line)
