import pytest

CRITERIA = {
    1: "level suite",
    2: "chi-square power at the explicit radius",
    3: "max-test power condition",
    4: "divergence identities",
    5: "lower-bound boundary",
    6: "concentration suite",
    7: "scaling reproduction",
    8: "formula cross-checks",
    9: "determinism",
}

_results = {}


@pytest.fixture
def criterion(request):
    """Call with (number, passed, detail) to record an acceptance result."""

    def record(number, passed, detail=""):
        _results[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n, name in CRITERIA.items():
        if n in _results:
            ok, detail = _results[n]
            line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({name})"
            if detail:
                line += f" {detail}"
        else:
            line = f"criterion {n}: FAIL ({name}) not run"
        terminalreporter.write_line(line)
