import pytest

_ACCEPTANCE: list[str] = []


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = []

    def _report(tag: str, title: str, ok: bool, detail: str):
        line = f"{tag} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        lines.append(line)
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    yield _report
    if not lines:
        line = f"{request.node.name} FAIL  raised before a result was computed"
        _ACCEPTANCE.append(line)
        print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0][1:]) if s[1:].split()[0].isdigit() else 99):
            terminalreporter.write_line(line)
