import pytest

VERDICTS = []


@pytest.fixture
def verdict():
    """Record and print a one-line acceptance verdict."""

    def record(number, name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({name}): {detail}"
        VERDICTS.append(line)
        print(line)
        return ok

    def skipped(line):
        VERDICTS.append(line)
        print(line)

    record.skipped = skipped
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
