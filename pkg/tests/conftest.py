import pytest

# one line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES = {}


@pytest.fixture
def report():
    def _report(criterion, passed, detail):
        line = f"CRITERION {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[criterion] = line
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
