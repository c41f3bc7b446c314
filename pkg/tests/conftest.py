"""Shared pytest configuration.

Prints one PASS/FAIL line per acceptance-gate criterion at the end of the
run so the gate's status is readable without scanning the full report.
"""

from __future__ import annotations

_acceptance_results: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::", 1)[-1]
    _acceptance_results.append((name, report.outcome.upper()))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome in _acceptance_results:
        status = "PASS" if outcome == "PASSED" else outcome
        terminalreporter.write_line(f"[{status}] {name}")
