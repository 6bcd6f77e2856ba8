"""Collects acceptance outcomes and prints one line per criterion."""

import pytest

_CRITERIA = {}
_OUTCOMES = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None and mark.args:
            _CRITERIA[item.nodeid] = mark.args


def pytest_runtest_logreport(report):
    if report.nodeid not in _CRITERIA:
        return
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        if report.skipped and isinstance(report.longrepr, tuple):
            detail = report.longrepr[2].removeprefix("Skipped: ")
        _OUTCOMES[report.nodeid] = (status, detail)
    elif report.when == "teardown" and report.failed:
        _OUTCOMES[report.nodeid] = ("FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    rows = sorted((_CRITERIA[k], v) for k, v in _OUTCOMES.items())
    for (number, title), (status, detail) in rows:
        line = f"criterion {number:>2} {status}  {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)


@pytest.fixture
def detail(record_property):
    """Attach a short measurement summary to the acceptance line."""

    def _set(text):
        record_property("detail", text)

    return _set
