import time

import pytest

_VERDICTS: list[str] = []
_START = time.perf_counter()


@pytest.fixture
def verdict():
    """Record one acceptance line ("PASS"/"FAIL", criterion, detail) and return the flag."""

    def record(number, name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {name}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_VERDICTS, key=lambda s: int(s.split()[2])):
        terminalreporter.write_line(line)
    terminalreporter.write_line(f"suite wall time {time.perf_counter() - _START:.1f} s")
