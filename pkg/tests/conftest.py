import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Records one summary line per acceptance criterion."""
    entry = {"name": request.node.name, "detail": ""}
    yield entry
    ACCEPTANCE_LINES.append(entry)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and "criterion" in item.fixturenames:
        item.funcargs["criterion"]["passed"] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for e in ACCEPTANCE_LINES:
        status = "PASS" if e.get("passed") else "FAIL"
        terminalreporter.write_line(f"{status}  {e['name']}  {e['detail']}")
