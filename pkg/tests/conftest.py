"""One pass/fail line per acceptance criterion in the terminal summary."""
import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if report.when == "call" or report.failed or report.skipped:
        prev = _RESULTS.get(number)
        ok = report.passed and (prev is None or prev[1])
        duration = (prev[2] if prev else 0.0) + report.duration
        _RESULTS[number] = (title, ok, duration)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, duration = _RESULTS[number]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"criterion {number:2d}  {status}  {title} ({duration:.1f} s)")
