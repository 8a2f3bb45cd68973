import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from noisyswitch.vi_solver import Grid, ProblemSpec, solve  # noqa: E402

# one line per acceptance criterion, filled by tests/test_acceptance.py and
# echoed after the test run (they would otherwise hide in captured stdout)
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

# Coarse enough to keep unit tests quick, fine enough that discretization
# error stays well under the tolerances the tests assert.
UNIT_GRID = Grid(x_min=-8.0, x_max=8.0, n_x=401, n_t=400)


@pytest.fixture(scope="session")
def unit_grid():
    return UNIT_GRID


@pytest.fixture(scope="session")
def sweep_small():
    """Solved surfaces on the unit grid for a small noise-level sweep,
    shared across test modules (solving is the expensive part)."""
    return {
        eps: solve(ProblemSpec(epsilon=eps), UNIT_GRID)
        for eps in (0.0, 0.0625, 1.0, 8.0)
    }
