import numpy as np
import pytest

# acceptance results keyed by criterion number, printed after the run
ACCEPTANCE = {}


def record(number, passed, detail):
    ok, lines = ACCEPTANCE.get(number, (True, []))
    ACCEPTANCE[number] = (ok and passed, lines + [detail])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, lines = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} | " + " | ".join(lines))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
