import numpy as np
import pytest

from tuplan import env as envmod
from tuplan import petri


@pytest.fixture
def four_cell():
    return petri.four_cell_net()


def line_env(n_cells, robots, regions=()):
    """1 x n corridor; ``regions`` lists (symbol, x) pairs."""
    regs = tuple(envmod.Region(s, frozenset([(x, 0)])) for s, x in regions)
    return envmod.GridEnvironment(n_cells, 1, frozenset(), regs, tuple((x, 0) for x in robots))


def random_net(rng, max_places=6, max_transitions=10, robots=1):
    n_p = int(rng.integers(2, max_places + 1))
    n_t = int(rng.integers(1, max_transitions + 1))
    return petri.random_state_machine(n_p, n_t, rng, robots)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
