from collections import defaultdict

import pytest
from hypothesis import settings

# Reproducible property runs: the same examples on every invocation.
settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")

_results: dict[int, list[bool]] = defaultdict(list)
_titles: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    _titles[n] = title
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _results[n].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        ok = all(_results[n])
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {_titles[n]}")
