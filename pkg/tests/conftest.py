from __future__ import annotations

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion gate")


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        item.user_properties.append(("criterion", tuple(marker.args)))


def pytest_runtest_logreport(report):
    tags = [value for name, value in report.user_properties if name == "criterion"]
    if not tags:
        return
    number, title = tags[0]
    entry = _RESULTS.setdefault(number, {"title": title, "passed": True, "seconds": 0.0})
    if report.failed or report.skipped:
        entry["passed"] = False
    if report.when == "call":
        entry["seconds"] += report.duration


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        r = _RESULTS[number]
        status = "PASS" if r["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {r['title']}  ({r['seconds']:.1f} s)")
