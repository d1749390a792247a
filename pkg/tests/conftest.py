import pytest

_VERDICTS: dict[str, str] = {}


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion and return the outcome."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        _VERDICTS[label] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_VERDICTS, key=lambda s: (int("".join(c for c in s if c.isdigit())), s)):
        terminalreporter.write_line(_VERDICTS[label])
