"""Collect one PASS/FAIL line per acceptance criterion for the terminal summary."""
import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Return a ``note(text)`` callable; the text is echoed next to the verdict."""
    entry = _CRITERIA.setdefault(request.node.nodeid, {"name": request.node.name, "detail": [], "outcome": "failed"})

    def note(text):
        entry["detail"].append(text)
        print(text)

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    entry = _CRITERIA.get(item.nodeid)
    if entry is not None and (rep.when == "call" or rep.failed):
        entry["outcome"] = rep.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for entry in _CRITERIA.values():
        verdict = "PASS" if entry["outcome"] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {entry['name']}")
        for line in entry["detail"]:
            terminalreporter.write_line(f"        {line}")
