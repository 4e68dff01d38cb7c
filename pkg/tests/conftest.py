"""Shared fixtures and the acceptance summary printed at session end."""

import numpy as np
import pytest

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def record_acceptance(name: str, passed: bool) -> None:
    _ACCEPTANCE_RESULTS[name] = "PASS" if passed else "FAIL"


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        if name not in _ACCEPTANCE_RESULTS:
            _ACCEPTANCE_RESULTS[name] = "PASS" if report.passed else "FAIL"
        elif not report.passed:
            _ACCEPTANCE_RESULTS[name] = "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{_ACCEPTANCE_RESULTS[name]}  {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
