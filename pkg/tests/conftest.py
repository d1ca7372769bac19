import pytest

ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def record_acceptance():
    def record(result):
        ACCEPTANCE_LINES[result.id] = result.line()
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
