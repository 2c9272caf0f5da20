"""Shared pytest wiring: the acceptance-criteria reporter."""

import pytest

_LINES = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one pass/fail line per criterion, then assert it."""

    def record(criterion: int, passed: bool, detail: str) -> None:
        _LINES.append(f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
        assert passed, f"acceptance criterion {criterion} failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES):
            terminalreporter.line(line)
