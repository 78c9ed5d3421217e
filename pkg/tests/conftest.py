import pytest

_ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Label an acceptance test; the terminal summary prints a PASS/FAIL line for it.

    Call the returned function with a title and the measured numbers before
    asserting, so a failing line still shows what was measured.
    """
    entry = {"title": request.node.name, "detail": "", "passed": None}
    _ACCEPTANCE[request.node.nodeid] = entry

    def report(title, detail=""):
        entry["title"], entry["detail"] = title, detail

    return report


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    entry = _ACCEPTANCE.get(item.nodeid)
    if entry is not None and rep.when == "call":
        entry["passed"] = rep.passed


def pytest_terminal_summary(terminalreporter):
    done = [e for e in _ACCEPTANCE.values() if e["passed"] is not None]
    if not done:
        return
    terminalreporter.section("acceptance criteria")
    for e in done:
        status = "PASS" if e["passed"] else "FAIL"
        detail = f"  [{e['detail']}]" if e["detail"] else ""
        terminalreporter.write_line(f"{status}  {e['title']}{detail}")
