"""Shared fixtures: acceptance-criterion reporting.

Acceptance tests register a one-line verdict before asserting, so the
terminal summary carries a per-criterion PASS/FAIL block even when a
criterion fails.
"""
import pytest

_CRITERION_LINES = {}


@pytest.fixture(scope="session")
def acceptance():
    """Recorder: acceptance(number, clause, passed, detail)."""
    def record(number, clause, passed, detail):
        key = (number, clause)
        verdict = "PASS" if passed else "FAIL"
        _CRITERION_LINES[key] = (
            f"criterion {number}{clause}: {verdict} — {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_LINES:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria")
    terminalreporter.write_line("-" * 19)
    for key in sorted(_CRITERION_LINES):
        terminalreporter.write_line(_CRITERION_LINES[key])
