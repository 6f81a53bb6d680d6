import pytest

from gfmstab.params import reference_converter, reference_grid

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def grid():
    return reference_grid()


@pytest.fixture
def conv():
    return reference_converter()


@pytest.fixture
def report():
    """Record one acceptance line: ``report(criterion, ok, detail)``."""
    def _record(criterion: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
