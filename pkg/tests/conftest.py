import numpy as np
import pytest

from stpg import fem, solver


class ConstantCoeffs:
    """Deterministic coefficient stub with fixed a and c0."""

    def __init__(self, a=1.0, c0=1.0):
        self._a = a
        self._c0 = c0

    def a(self, omega):
        return self._a

    def c0(self, omega):
        return self._c0


def make_disc(dim=1, n_cells=8, degree=1, n_steps=8, final_time=1.0):
    mesh = fem.build_mesh(dim, n_cells, degree)
    pair = fem.assemble(mesh)
    grid = solver.TimeGrid.uniform(final_time, n_steps)
    return solver.Discretization(pair=pair, grid=grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
