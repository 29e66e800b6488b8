import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion(capsys):
    """``criterion(label, ok, detail)`` prints and keeps one PASS/FAIL line."""

    def report(label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        _LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
