import numpy as np
import pytest

_ACCEPTANCE = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance():
    """Record one criterion's verdict: acceptance(number, title, passed, detail)."""
    def record(number, title, passed, detail=""):
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"[acceptance {number}] {'PASS' if passed else 'FAIL'} {title} -- {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{number:>2}. {'PASS' if passed else 'FAIL'}  {title}: {detail}")
