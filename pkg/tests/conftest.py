"""Shared test plumbing: collect acceptance-criterion results and print
them as a summary section regardless of output capturing."""

import re

ACCEPTANCE_DETAILS = []
_acceptance_outcomes = []


def record_criterion(criterion, text):
    ACCEPTANCE_DETAILS.append(f"PASS criterion {criterion}: {text}")


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    match = re.search(r"Criterion(\d+)", report.nodeid)
    if match:
        _acceptance_outcomes.append(
            (int(match.group(1)), report.nodeid, report.outcome)
        )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_DETAILS:
        terminalreporter.write_line(line)
    for criterion, nodeid, outcome in _acceptance_outcomes:
        if outcome != "passed":
            terminalreporter.write_line(
                f"FAIL criterion {criterion}: {nodeid.split('::')[-1]}"
            )
