import pytest

# per criterion label: set of outcomes of the tests carrying it
_outcomes: dict[str, set[str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or not report.passed:
        _outcomes.setdefault(marker.args[0], set()).add(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_outcomes, key=lambda s: int(s.split()[0][1:])):
        seen = _outcomes[label]
        status = "FAIL" if "failed" in seen else "PASS" if "passed" in seen else "SKIP"
        terminalreporter.write_line(f"{status}  {label}")
