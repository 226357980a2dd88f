"""Shared test plumbing: the acceptance-criterion reporter.

The acceptance tests each certify one criterion with a single PASS/FAIL
line.  pytest captures stdout per test, so the lines are collected here
and replayed as a terminal-summary section, where they always appear in
the run log regardless of capture mode.
"""

import pytest

_criterion_lines = []


@pytest.fixture
def certify():
    """Record one criterion verdict and assert it."""
    def _certify(name, ok, detail):
        line = f"[criterion] {name}: {'PASS' if ok else 'FAIL'} ({detail})"
        _criterion_lines.append(line)
        print(line)
        assert ok, f"{name}: {detail}"
    return _certify


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
