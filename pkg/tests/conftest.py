import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def _report(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
