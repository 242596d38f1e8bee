import warnings

import pytest

from median_consensus.protocol import BoundaryWarning

ACCEPTANCE_LINES = []


@pytest.fixture(autouse=True)
def _quiet_boundary():
    # Sim 3/4 sit on beta == 1/n^2; the warning is exercised explicitly elsewhere
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        yield


@pytest.fixture
def record_criterion():
    def record(number, passed, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
