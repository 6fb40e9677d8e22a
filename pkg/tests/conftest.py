"""Prints one pass/fail line per acceptance criterion after the run."""

import re

_CRITERIA = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2).replace("_", " "))
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or report.failed:
        status = "PASS" if report.passed else "FAIL"
        prev = _CRITERIA.get(key)
        if prev is not None:
            # parametrized criteria: any failing case fails the criterion
            status = "FAIL" if "FAIL" in (status, prev[0]) else "PASS"
            detail = "; ".join(d for d in (prev[1], detail) if d)
        _CRITERIA[key] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (n, title), (status, detail) in sorted(_CRITERIA.items()):
        line = f"criterion {n} [{title}]: {status}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
