import numpy as np
import pytest

from sccread import RatePowerLaws, RateSet, SaturationModel

# one-line verdicts collected by the acceptance tests, echoed after the run
VERDICTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in VERDICTS:
            terminalreporter.write_line(line)

# Saturation-law coefficients of the reference emitter used throughout
# the tests (measured power dependences of the four rates; powers in uW,
# rates in cps).
REFERENCE_LAWS = RatePowerLaws(
    g0=SaturationModel(kind="quadratic_sat", a=39.0, P_sat=134.0),
    g1=SaturationModel(kind="quadratic_sat", a=310.0, P_sat=53.2),
    gamma0=SaturationModel(kind="linear_sat", a=1650.0, P_sat=134.0, dc=268.0),
    gamma1=SaturationModel(kind="linear_sat", a=46200.0, P_sat=53.0, dc=268.0),
)

# the documented two-state example used by several pmf tests
EXAMPLE_RATES = RateSet(g0=300.0, g1=500.0, gamma0=2000.0, gamma1=40000.0)


@pytest.fixture
def reference_laws():
    return REFERENCE_LAWS


@pytest.fixture
def example_rates():
    return EXAMPLE_RATES


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    size = max(p.size, q.size)
    pp = np.zeros(size)
    qq = np.zeros(size)
    pp[: p.size] = p
    qq[: q.size] = q
    # fold truncation remainders into the distance as unmatched mass
    pp_rem = max(0.0, 1.0 - pp.sum())
    qq_rem = max(0.0, 1.0 - qq.sum())
    return 0.5 * (np.abs(pp - qq).sum() + abs(pp_rem - qq_rem))
