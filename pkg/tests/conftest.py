import pytest

ACCEPTANCE_LINES = {}


@pytest.fixture
def record():
    """Store a one-line verdict for an acceptance criterion."""

    def _record(number, passed, detail):
        ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
