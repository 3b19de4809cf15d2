import re

import pytest

_LINES: list[str] = []


class Criterion:
    """Records one pass/fail line per acceptance criterion, then asserts."""

    def __call__(self, number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
        _LINES.append(line)
        print(line)
        assert ok, line


@pytest.fixture
def criterion():
    return Criterion()


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    key = lambda s: (int(re.search(r"criterion (\d+)", s).group(1)), s)
    for line in sorted(_LINES, key=key):
        terminalreporter.write_line(line)
