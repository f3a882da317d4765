import collections

import numpy as np
import pytest

_CRITERIA: dict[int, dict] = collections.OrderedDict()


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, text = marker
    entry = _CRITERIA.setdefault(number, {"text": text, "failed": False, "ran": False, "skipped": False})
    if report.when == "call" or report.outcome != "passed":
        entry["ran"] = True
    if report.outcome == "failed":
        entry["failed"] = True
    elif report.outcome == "skipped":
        entry["skipped"] = True


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = (marker.args[0], marker.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        if entry["failed"] or not entry["ran"]:
            status = "FAIL"
        else:
            status = "SKIP" if entry["skipped"] else "PASS"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {entry['text']}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
