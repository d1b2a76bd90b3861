import numpy as np
import pytest

from wardlab.solitons import SolitonSpec, one_pole

# filled by tests/test_acceptance.py; printed after the run
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def lump():
    """Static one-pole field, mu = i, f = omega."""
    return one_pole(SolitonSpec(1j))


@pytest.fixture(scope="session")
def moving_lump():
    """Moving one-pole field, mu = i + 0.5, f = omega."""
    return one_pole(SolitonSpec(0.5 + 1j))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        rec = ACCEPTANCE[k]
        status = "PASS" if rec["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {k:2d} {status}  {rec['title']}: {rec['detail']}")
