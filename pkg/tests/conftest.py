import pytest

CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion and assert on it."""

    def report(k: int, ok: bool, detail: str) -> None:
        line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}"
        CRITERIA[k] = line
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
