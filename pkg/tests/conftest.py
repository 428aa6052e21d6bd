import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    entry = _criteria.setdefault(n, {"title": marker.kwargs.get("title", ""), "failed": [], "passed": 0})
    if rep.when == "call" or rep.failed:
        if rep.failed:
            entry["failed"].append(item.name)
        elif rep.when == "call" and rep.passed:
            entry["passed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        status = "FAIL" if e["failed"] else "PASS"
        detail = f" ({', '.join(e['failed'])})" if e["failed"] else ""
        tr.write_line(f"criterion {n}: {status} - {e['title']}{detail}")
