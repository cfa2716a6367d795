import pytest

from hybrid_node.config import table1_config

# (criterion, passed, detail) lines gathered by test_acceptance
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def table1():
    return table1_config()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
