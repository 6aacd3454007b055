import pytest
from hypothesis import settings

# first calls may include numba compilation
settings.register_profile("fresco", deadline=None)
settings.load_profile("fresco")

ACCEPTANCE_RESULTS = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when not in ("setup", "call"):
        return
    n, label = marker.args
    if report.when == "setup" and report.passed:
        return
    previous = ACCEPTANCE_RESULTS.get(n, (label, True, ""))
    ok = previous[1] and report.passed
    detail = previous[2]
    if not report.passed and report.longrepr is not None:
        detail = str(getattr(report.longrepr, "reprcrash", None) or "").splitlines()[-1:] or [""]
        detail = detail[0]
    ACCEPTANCE_RESULTS[n] = (label, ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        label, ok, detail = ACCEPTANCE_RESULTS[n]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {label}"
        if not ok and detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
