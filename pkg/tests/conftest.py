import re

import pytest

_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _LINES.append


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: (int(re.search(r"\d+", s).group()), s)):
            terminalreporter.write_line(line)
