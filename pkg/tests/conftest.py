from pathlib import Path

import numpy as np
import pytest

from nppsim.mesh import build_grid
from nppsim.model import (ConstantDiffusivity, ProblemSpec, Regularization, SpeciesSpec,
                          boundary_data)

PKG = Path(__file__).resolve().parents[1] / "src" / "nppsim"
CONFIG_DIR = PKG / "configs"
FIXTURE_DIR = PKG / "fixtures"

# lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pair_spec(cells=(64,), eta=0.01, final_time=0.5, xi=None, tau=1.0, p=2.0, d_anion=0.5):
    """Cation/anion pair with smooth non-equilibrium initial data."""
    dim = len(cells)
    grid = build_grid(dim, list(cells), [1.0] * dim)
    x = grid.centers[:, 0]
    y = grid.centers[:, -1]
    shape = np.cos(np.pi * x) * (np.cos(np.pi * y) if dim == 2 else 1.0)
    cp = 1.0 + 0.5 * shape
    cm = 1.0 - 0.3 * np.cos(2 * np.pi * x)
    species = [SpeciesSpec("cation", 1, ConstantDiffusivity(1.0), cp),
               SpeciesSpec("anion", -1, ConstantDiffusivity(d_anion), cm)]
    xi = {"x-": 0.5, "x+": -0.2} if xi is None else xi
    return ProblemSpec(grid, species, boundary_data(grid, tau=tau, xi=xi),
                       regularization=Regularization(eta, p), final_time=final_time)


@pytest.fixture
def spec_1d():
    return pair_spec()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
