import numpy as np
import pytest

from amslab.gaussian import coherent_state, vacuum_state
from amslab.greenops import FieldOperatorSpec
from amslab.lattice import LatticeFunction, Region, SpacetimeGrid
from amslab.synthesis import synthesize_scheme
from amslab.targets import bump

LAMBDAS = (0.4, 0.2, 0.1, 0.05, 0.025)


@pytest.fixture(scope="session")
def grid():
    return SpacetimeGrid(64, 64, 0.05, 0.1)


@pytest.fixture(scope="session")
def small_grid():
    return SpacetimeGrid(12, 10, 0.05, 0.1)


@pytest.fixture(scope="session")
def S(grid):
    return FieldOperatorSpec(grid, (1.0,), "system")


@pytest.fixture(scope="session")
def P(grid):
    return FieldOperatorSpec(grid, (1.0,), "probe")


@pytest.fixture(scope="session")
def regions():
    return Region.box(13, 29, 20, 25), Region.slab(44, 60)


def make_target(grid, amplitude=30.0):
    return bump(grid, 21, 32, 3, 3, amplitude)


@pytest.fixture(scope="session")
def target(grid):
    return make_target(grid)


@pytest.fixture(scope="session")
def scheme(S, P, target, regions):
    return synthesize_scheme(S, P, target, *regions, order_k=1)


@pytest.fixture(scope="session")
def system_vacuum(S):
    return vacuum_state(S)


@pytest.fixture(scope="session")
def probe_vacuum(P):
    return vacuum_state(P)


@pytest.fixture(scope="session")
def shifted_system(grid, system_vacuum):
    return coherent_state(system_vacuum, bump(grid, 8, 32, 3, 6, 10.0))


def random_source(grid, rng, t_lo, t_hi, components=1, x_lo=0, x_hi=None, complex_=False):
    """Normal noise on slices [t_lo, t_hi] and sites [x_lo, x_hi)."""
    x_hi = grid.nx if x_hi is None else x_hi
    v = np.zeros((components,) + grid.shape, dtype=complex if complex_ else float)
    shape = (components, t_hi - t_lo + 1, x_hi - x_lo)
    v[:, t_lo:t_hi + 1, x_lo:x_hi] = rng.standard_normal(shape)
    if complex_:
        v[:, t_lo:t_hi + 1, x_lo:x_hi] += 1j * rng.standard_normal(shape)
    return LatticeFunction(grid, v)


ACCEPTANCE_LINES = []


def record(number, ok, title, detail):
    """Log one PASS/FAIL line; the lines are repeated in the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'} [{number:2d}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
