import pytest

VERDICTS = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion (INFO when ok is None)."""
    def record(label: str, ok, detail: str):
        tag = "INFO" if ok is None else ("PASS" if ok else "FAIL")
        VERDICTS.append(f"{tag}  {label}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
