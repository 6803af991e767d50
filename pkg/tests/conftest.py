import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    n, title = mark.args
    detail = getattr(item, "criterion_detail", "")
    # parametrized criteria pass only if every case passes
    c = _CRITERIA.setdefault(n, {"title": title, "passed": True, "details": [], "seconds": 0.0})
    c["passed"] = c["passed"] and rep.passed
    c["seconds"] += rep.duration if rep.when == "call" else 0.0
    if detail:
        c["details"].append(detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        c = _CRITERIA[n]
        status = "PASS" if c["passed"] else "FAIL"
        line = f"criterion {n:2d} {status}  {c['title']}  ({c['seconds']:.1f} s)"
        if c["details"]:
            line += "  " + "; ".join(c["details"])
        terminalreporter.write_line(line)
