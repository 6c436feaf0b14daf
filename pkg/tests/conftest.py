import pytest

_LINES: list[str] = []


@pytest.fixture
def report(request):
    """Record one ``PASS``/``FAIL`` line per acceptance criterion for the terminal summary."""

    def _report(tag: str, ok: bool, detail: str) -> bool:
        line = f"{tag} {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
