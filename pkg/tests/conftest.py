import pytest

_LINES = []


@pytest.fixture
def report():
    """Record (and print) one acceptance line: ``report(criterion, ok, detail)``."""
    def emit(criterion, ok, detail):
        line = f"CRITERION {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES.append(line)
        print(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
