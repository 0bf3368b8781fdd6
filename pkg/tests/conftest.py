import pytest

_REPORT = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion.

    Usage: ``report(number, title, ok, detail)``; returns `ok` so it can be
    asserted directly.
    """
    def record(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}"
        if detail:
            line += f" ({detail})"
        _REPORT.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_REPORT):
        terminalreporter.write_line(line)
