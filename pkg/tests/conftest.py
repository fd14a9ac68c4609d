import numpy as np
import pytest

from riesz_lab.critical import rho_field
from riesz_lab.grid import GridFunction, make_grid
from riesz_lab.operators import assemble_schrodinger


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def unit_potential_small():
    """``L = -Laplacian + 1`` on the d=3, n=8, side=2 torus with its critical radii."""
    grid = make_grid(3, 8, 2.0)
    V = GridFunction.constant(grid, 1.0)
    return grid, V, assemble_schrodinger(grid, V), rho_field(V, 2.0)


@pytest.fixture(scope="session")
def unit_potential_12():
    """``L = -Laplacian + 1`` on the d=3, n=12, side=3 torus with its critical radii."""
    grid = make_grid(3, 12, 3.0)
    V = GridFunction.constant(grid, 1.0)
    return grid, V, assemble_schrodinger(grid, V), rho_field(V, 2.0)


ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def acceptance(request):
    """``acceptance(number, ok, detail)`` records and prints one criterion line."""
    lines = request.config.stash[ACCEPTANCE]

    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
