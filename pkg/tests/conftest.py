import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from seglab.forcing import make_forcing
from seglab.grid import make_grid
from seglab.grouping import make_decomposition, validate_coupling
from seglab.solver import SolveConfig, beta_sweep, solve

settings.register_profile("seglab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("seglab")

SWEEP = (1e2, 1e3, 1e4, 1e5)


def symmetric_1d(n=2048):
    """Two species on [0, 1] with opposite unit data at the ends."""
    grid = make_grid(1, [(0.0, 1.0)], n)
    bnd = np.zeros((2,) + grid.shape)
    bnd[0, 0] = 1.0
    bnd[1, -1] = 1.0
    return grid, bnd


def diagonal_2d(n):
    """Two species on the unit square with ramps (1 - x - y)^+ and (x + y - 1)^+."""
    grid = make_grid(2, [(0.0, 1.0), (0.0, 1.0)], n)
    X, Y = grid.mesh()
    return grid, np.stack([np.maximum(1 - X - Y, 0.0), np.maximum(X + Y - 1, 0.0)])


@pytest.fixture(scope="session")
def dec2():
    return make_decomposition(2, [0, 1, 2])


@pytest.fixture(scope="session")
def pair_coupling(dec2):
    return validate_coupling(dec2, [[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture(scope="session")
def zero2(dec2):
    return make_forcing(dec2)


@pytest.fixture(scope="session")
def sweep_1d(dec2, pair_coupling, zero2):
    """The warm-started 1D symmetric sweep at n=2048."""
    grid, bnd = symmetric_1d()
    return beta_sweep(grid, bnd, SolveConfig(beta=0.0), dec2, pair_coupling, zero2, SWEEP)


@pytest.fixture(scope="session")
def solved_1d(sweep_1d):
    """The beta=1e5 field of the 1D sweep."""
    return sweep_1d[-1].result.fields


@pytest.fixture(scope="session")
def solved_2d(dec2, pair_coupling, zero2):
    """beta=1e5 solves of the diagonal problem at n=256 and n=512."""
    out = {}
    for n in (256, 512):
        grid, bnd = diagonal_2d(n)
        out[n] = solve(grid, bnd, SolveConfig(beta=1e5), dec2, pair_coupling, zero2)
    return out


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Append ``(criterion, passed, detail)``; the lines are printed in the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(lines, key=lambda t: t[0]):
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
