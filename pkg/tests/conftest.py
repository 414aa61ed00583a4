import pytest

_RESULTS = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(tag, passed, detail)``."""

    def record(tag, passed, detail):
        _RESULTS[tag] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for tag in sorted(_RESULTS, key=lambda t: int(t[2:])):
        ok, detail = _RESULTS[tag]
        terminalreporter.write_line(f"{tag} {'PASS' if ok else 'FAIL'}  {detail}")
