"""Finite-volume solver for regularized Nernst-Planck-Poisson systems."""
from .coupling import SolverSettings, State, advance, run
from .mesh import build_cutoff, build_grid
from .model import (ProblemSpec, Regularization, Scales, SpeciesSpec, boundary_data,
                    validate)
from .poisson import solve_potential

__version__ = "0.1.0"

__all__ = [
    "ProblemSpec", "Regularization", "Scales", "SolverSettings", "SpeciesSpec", "State",
    "advance", "boundary_data", "build_cutoff", "build_grid", "run", "solve_potential",
    "validate",
]
