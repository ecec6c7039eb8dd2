import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tidal_kdv import Field, Grid  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def grid():
    return Grid(512, 20.0)


@pytest.fixture
def gaussian(grid):
    return Field(grid, np.exp(-grid.x**2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def band_limited(grid, rng, modes=12, decay=0.5):
    """Random real field whose spectrum is confined to the lowest ``modes`` wavenumbers."""
    spec = np.zeros(grid.k.size, dtype=complex)
    c = rng.normal(size=modes) + 1j * rng.normal(size=modes)
    spec[1 : modes + 1] = c * np.exp(-decay * np.arange(modes)) * grid.num_points
    return Field.from_spectrum(grid, spec)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
