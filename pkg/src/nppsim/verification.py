"""Reusable verification checks shared by the ``verify`` command and the tests."""
from __future__ import annotations

import numpy as np

from .coupling import SolverSettings, advance, initial_state, run
from .mesh import build_grid
from .model import ProblemSpec, boundary_data
from .oracle import EquilibriumSolution, dense_step_oracle, solve_equilibrium
from .poisson import solve_potential
from .transport import compute_fluxes


def poisson_mms(cells=(32, 64, 128), tol=1e-13) -> dict:
    """Manufactured solution ``phi = cos(pi x)`` on (0, 1) with tau = 1.

    Then ``rho = pi^2 cos(pi x)``, ``xi(0) = 1`` and ``xi(1) = -1``. Returns
    discrete L2 errors and the observed orders between successive grids.
    """
    errors = []
    for n in cells:
        grid = build_grid(1, [n], [1.0])
        x = grid.centers[:, 0]
        bd = boundary_data(grid, tau=1.0, xi={"x-": 1.0, "x+": -1.0})
        sol = solve_potential(grid, np.pi ** 2 * np.cos(np.pi * x), bd, tol=tol)
        err = sol.phi - np.cos(np.pi * x)
        errors.append(float(np.sqrt(grid.cell_volume * np.sum(err ** 2))))
    orders = [float(np.log(e0 / e1) / np.log(n1 / n0))
              for (e0, e1, n0, n1) in zip(errors[:-1], errors[1:], cells[:-1], cells[1:])]
    return {"cells": list(cells), "errors": errors, "orders": orders,
            "order": float(np.mean(orders))}


def oracle_step_difference(spec: ProblemSpec, dt, tol=1e-11, damping=0.8) -> dict:
    """Compare one ``advance`` step with the dense fully coupled Newton step."""
    settings = SolverSettings(damping=damping, tol=tol, inner_tol=min(1e-11, tol))
    s0 = initial_state(spec, settings)
    s1, rep = advance(s0, dt, spec, settings)
    c_ref, phi_ref, hist = dense_step_oracle(spec.grid, s0.c, s0.phi, dt, spec)
    return {"c_diff": float(np.max(np.abs(s1.c - c_ref))),
            "phi_diff": float(np.max(np.abs(s1.phi - phi_ref))),
            "fixed_point_iterations": rep.fixed_point_iterations,
            "oracle_iterations": len(hist) - 1}


def equilibrium_of(spec: ProblemSpec, tol=1e-12) -> EquilibriumSolution:
    """Poisson-Boltzmann state carrying the masses of the initial data."""
    masses = spec.grid.cell_volume * np.sum(spec.initial_concentrations(), axis=1)
    return solve_equilibrium(spec.grid, masses, spec.charges, spec.boundary, tol=tol,
                             scales=spec.scales)


def max_flux_at(spec: ProblemSpec, c, phi, t=0.0) -> float:
    """Largest face flux magnitude of the transport discretization at ``(c, phi)``."""
    f = compute_fluxes(spec.grid, np.asarray(c), np.asarray(phi), spec.diffusivity_faces(t),
                       spec.charges, spec.regularization, spec.scales.drift)
    return float(np.max(np.abs(f.total)))


def long_time_match(spec: ProblemSpec, dt, c_ref, settings: SolverSettings) -> dict:
    """Run to ``spec.final_time`` and report per-species L1 distance to ``c_ref``."""
    traj = run(spec, dt, settings=settings, keep_states=False)
    c = traj.final.c
    l1 = spec.grid.cell_volume * np.sum(np.abs(c - np.asarray(c_ref)), axis=1)
    return {"l1_per_species": [float(v) for v in l1], "final_time": float(traj.final.t)}
