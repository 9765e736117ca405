import numpy as np
import pytest

from indiffprice.market import default_params
from indiffprice.payoff import VulnerablePayoffParams, vulnerable_put


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def vput():
    return vulnerable_put(VulnerablePayoffParams())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
