import pytest

from nlgrad.domain import build_grid
from nlgrad.operators import table_for_grid
from nlgrad.zero_grad import build_n_basis


@pytest.fixture(scope="session")
def ref2000():
    grid = build_grid(-3, 3, 1, 2000)
    return grid, table_for_grid(grid, 0.5, 0.5)


@pytest.fixture(scope="session")
def ref800():
    grid = build_grid(-3, 3, 1, 800)
    return grid, table_for_grid(grid, 0.5, 0.5)


@pytest.fixture(scope="session")
def ref400():
    grid = build_grid(-3, 3, 1, 400)
    return grid, table_for_grid(grid, 0.5, 0.5)


@pytest.fixture(scope="session")
def basis400(ref400):
    grid, table = ref400
    return build_n_basis(table, grid)


@pytest.fixture(scope="session")
def basis800(ref800):
    grid, table = ref800
    return build_n_basis(table, grid)
