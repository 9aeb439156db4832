"""Report one pass/fail line per acceptance criterion at the end of a run."""

import re

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    match = re.search(r"test_acceptance\.py::test_(criterion_\d+)", report.nodeid)
    if not match:
        return
    name = match.group(1)
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split("_")[1])):
        outcome = _ACCEPTANCE[name].upper()
        terminalreporter.write_line(f"{name.replace('_', ' ')}: {outcome}")
