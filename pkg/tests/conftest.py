import pytest

_LINES = []


@pytest.fixture
def report():
    """Record one acceptance verdict; the line is echoed in the terminal summary."""
    def _report(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        _LINES.append(line)
        print(line)
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
