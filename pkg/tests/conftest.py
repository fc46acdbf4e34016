import pytest

from nctorus.numbertheory import cf_expand, tower

_CRITERIA: dict = {}


def record(number: int, ok: bool, detail: str = "") -> None:
    """Store one acceptance verdict; printed again in the terminal summary."""
    line = f"CRITERION {number:2d}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
    _CRITERIA[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])


@pytest.fixture(scope="session")
def golden_levels():
    return tower(cf_expand("golden", 24), 4)


@pytest.fixture(scope="session")
def silver_levels():
    return tower(cf_expand("silver", 24), 4)


@pytest.fixture(scope="session")
def golden1(golden_levels):
    return golden_levels[0]
