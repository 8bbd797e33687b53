import pytest

CRITERIA_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line; returns the flag so the test can assert it."""
    def record(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        CRITERIA_LINES.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(CRITERIA_LINES):
        terminalreporter.write_line(line)
