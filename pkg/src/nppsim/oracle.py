"""Reference solutions that do not share code paths with the solver.

* :func:`solve_equilibrium` computes the Poisson-Boltzmann steady state with
  prescribed masses by damped Newton on a dense system.
* :func:`dense_step_oracle` solves one fully coupled backward-Euler step
  (all species and the potential at once) by Newton with a finite-difference
  Jacobian.

Both assemble their own dense operators directly from the grid
connectivity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError
from .mesh import Grid
from .model import BoundaryData, ProblemSpec, Scales


class OracleError(SolverError):
    pass


def dense_robin_laplacian(grid: Grid, boundary: BoundaryData, permittivity=1.0):
    n = grid.n_cells
    A = np.zeros((n, n))
    for a, b, area, axis in grid.interior_faces:
        w = permittivity * area / grid.spacing[axis]
        A[a, a] += w
        A[b, b] += w
        A[a, b] -= w
        A[b, a] -= w
    rhs = np.zeros(n)
    for k, (cell, axis, sign, area) in enumerate(grid.boundary_faces):
        A[cell, cell] += permittivity * boundary.tau[k] * area
        rhs[cell] += permittivity * boundary.xi[k] * area
    return A, rhs


@dataclass(eq=False)
class EquilibriumSolution:
    phi_eq: np.ndarray
    c_eq: np.ndarray
    newton_residual: float
    iterations: int = 0
    history: list = field(default_factory=list)


def _boltzmann(phi, masses, charges, beta, vol):
    c = np.empty((len(masses), len(phi)))
    for i, (m, z) in enumerate(zip(masses, charges)):
        e = -z * beta * phi
        w = np.exp(e - e.max())
        c[i] = m * w / (vol * w.sum())
    return c


def solve_equilibrium(grid: Grid, masses, charges, boundary: BoundaryData, tol=1e-12,
                      scales: Scales = Scales(), max_iter=200, phi0=None) -> EquilibriumSolution:
    """Poisson-Boltzmann state ``c_i = m_i exp(-z_i phi) / int exp(-z_i phi)``.

    Newton on ``A phi - b_xi - vol * F * sum_i z_i c_i(phi) = 0`` with
    backtracking; converged when the max-norm residual is below
    ``tol * (1 + |b|)``.
    """
    masses = np.asarray(masses, dtype=float)
    charges = np.asarray(charges, dtype=float)
    if np.any(masses <= 0):
        raise ValueError("masses must be positive")
    if not np.any(np.asarray(boundary.tau) > 0):
        raise ValueError("tau is identically zero")
    vol = grid.cell_volume
    beta = scales.drift
    F = scales.faraday
    A, b = dense_robin_laplacian(grid, boundary, scales.permittivity)

    def residual(phi):
        c = _boltzmann(phi, masses, charges, beta, vol)
        return A @ phi - b - vol * F * (charges @ c), c

    phi = np.zeros(grid.n_cells) if phi0 is None else np.array(phi0, dtype=float)
    r, c = residual(phi)
    scale = 1.0 + np.max(np.abs(b)) + vol * F * np.max(np.abs(masses)) / grid.volume
    history = [float(np.max(np.abs(r)))]
    for it in range(1, max_iter + 1):
        if history[-1] <= tol * scale:
            return EquilibriumSolution(phi, c, history[-1], it - 1, history)
        J = A.copy()
        for i, (m, z) in enumerate(zip(masses, charges)):
            if z == 0:
                continue
            g = c[i]
            J += vol * F * z * z * beta * (np.diag(g) - vol * np.outer(g, g) / m)
        step = np.linalg.solve(J, -r)
        lam = 1.0
        while True:
            trial = phi + lam * step
            r_new, c_new = residual(trial)
            if np.max(np.abs(r_new)) < (1 - 1e-4 * lam) * history[-1] or lam < 1e-8:
                break
            lam *= 0.5
        phi, r, c = trial, r_new, c_new
        history.append(float(np.max(np.abs(r))))
        if lam < 1e-8 and history[-1] > tol * scale:
            break
    if history[-1] <= tol * scale:
        return EquilibriumSolution(phi, c, history[-1], len(history) - 1, history)
    raise OracleError(f"equilibrium Newton stalled at residual {history[-1]:.3e}", history)


def _bern(x):
    x = np.asarray(x, dtype=float)
    xs = np.where(x == 0.0, 1.0, x)
    with np.errstate(over="ignore"):
        return np.where(x == 0.0, 1.0, xs / np.expm1(xs))


def _signed_power(c, p):
    return np.sign(c) * np.abs(c) ** p


def coupled_residual(u, c_old, dt, t_new, spec: ProblemSpec, source, A, b_xi):
    """Residual of the fully coupled backward-Euler system at ``u = [c_1..c_P, phi]``."""
    grid = spec.grid
    n = grid.n_cells
    P = spec.n_species
    c = u[: P * n].reshape(P, n)
    phi = u[P * n:]
    vol = grid.cell_volume
    beta = spec.scales.drift
    eta, p = spec.regularization.eta, spec.regularization.p
    res = np.empty_like(u)
    faces = grid.interior_faces
    for i, s in enumerate(spec.species):
        d = s.diffusivity(t_new, grid.face_centers)
        r = vol * (c[i] - c_old[i]) / dt - vol * source[i]
        for k, (a, bb, area, axis) in enumerate(faces):
            h = grid.spacing[axis]
            x = s.charge * beta * (phi[bb] - phi[a])
            J = d[k] / h * (_bern(x) * c[i, a] - _bern(-x) * c[i, bb])
            J -= d[k] * eta / h * (_signed_power(c[i, bb], p) - _signed_power(c[i, a], p))
            r[a] += area * J
            r[bb] -= area * J
        res[i * n:(i + 1) * n] = r
    rho = spec.scales.faraday * (spec.charges @ c)
    res[P * n:] = A @ phi - b_xi - vol * rho
    return res


def dense_step_oracle(grid: Grid, c_old, phi_old, dt, spec: ProblemSpec, t_old=0.0,
                      tol=1e-13, max_iter=60, fd_step=1e-6):
    """One fully coupled backward-Euler step on a tiny grid.

    Returns ``(c_new, phi_new, history)``.
    """
    if grid is not spec.grid:
        raise ValueError("grid must be the problem grid")
    n = grid.n_cells
    P = spec.n_species
    if n > 8 or P * n + n > 72:
        raise ValueError("dense oracle is limited to 8 cells and 72 unknowns")
    c_old = np.asarray(c_old, dtype=float)
    A, b_xi = dense_robin_laplacian(grid, spec.boundary, spec.scales.permittivity)
    source = np.asarray(spec.reactions(t_old, grid.centers, c_old), dtype=float)
    t_new = t_old + dt
    u = np.concatenate([c_old.ravel(), np.asarray(phi_old, dtype=float)])
    f = lambda v: coupled_residual(v, c_old, dt, t_new, spec, source, A, b_xi)
    r = f(u)
    scale = 1.0 + np.max(np.abs(u))
    history = [float(np.max(np.abs(r)))]
    for _ in range(max_iter):
        m = len(u)
        Jac = np.empty((m, m))
        for j in range(m):
            h = fd_step * max(1.0, abs(u[j]))
            e = np.zeros(m)
            e[j] = h
            Jac[:, j] = (f(u + e) - f(u - e)) / (2.0 * h)
        du = np.linalg.solve(Jac, -r)
        u = u + du
        r = f(u)
        history.append(float(np.max(np.abs(r))))
        if np.max(np.abs(du)) <= tol * scale and history[-1] <= 1e3 * tol * scale:
            return u[: P * n].reshape(P, n), u[P * n:], history
    raise OracleError(f"dense Newton did not converge (residual {history[-1]:.3e})", history)
