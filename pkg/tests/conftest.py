import numpy as np
import pytest

from ivchoice.sim import TrialSample

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def trial_from_cells(cells):
    """Build a TrialSample from {(z, d): (rows, successes)}."""
    z, d, y = [], [], []
    for (zv, dv), (k, s) in sorted(cells.items()):
        z += [zv] * k
        d += [dv] * k
        y += [1.0] * s + [0.0] * (k - s)
    return TrialSample(np.array(z), np.array(d), np.array(y))


# 30 rows drawn once from the default TrialConfig (seed 7) and frozen here.
FIXED_30 = {(0, 0): (13, 5), (0, 1): (1, 0), (1, 0): (4, 3), (1, 1): (12, 10)}


@pytest.fixture
def fixed30():
    return trial_from_cells(FIXED_30)
