"""Finite-volume Robin-Laplacian.

Solves ``-eps * Lap(phi) = rho`` in the box with ``d phi/dn + tau * phi = xi``
on the boundary. The Robin closure uses the adjacent cell value, so each
boundary face adds ``eps * tau * area`` to the diagonal and
``eps * xi * area`` to the right-hand side. The assembled matrix is a
symmetric M-matrix, positive definite whenever tau is not identically zero.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import SolverError
from .mesh import Grid
from .model import BoundaryData

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class PotentialSolve:
    phi: np.ndarray
    grad_phi: np.ndarray
    boundary_normal_derivative: np.ndarray
    residual_norm: float
    iterations: int
    residual_history: list = field(default_factory=list)


class PotentialSolveError(SolverError):
    pass


def assemble(grid: Grid, boundary: BoundaryData, permittivity: float = 1.0):
    """Return the sparse operator and the constant boundary right-hand side."""
    tau = np.asarray(boundary.tau, dtype=float)
    if not np.any(tau > 0):
        raise ValueError("tau is identically zero; the Robin problem is singular")
    n = grid.n_cells
    w = permittivity * grid.face_area / grid.face_distance
    a, b = grid.face_a, grid.face_b
    diag = np.zeros(n)
    np.add.at(diag, a, w)
    np.add.at(diag, b, w)
    np.add.at(diag, grid.bnd_cell, permittivity * tau * grid.bnd_area)
    rows = np.concatenate([np.arange(n), a, b])
    cols = np.concatenate([np.arange(n), b, a])
    vals = np.concatenate([diag, -w, -w])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    rhs_bnd = np.zeros(n)
    np.add.at(rhs_bnd, grid.bnd_cell,
              permittivity * np.asarray(boundary.xi, dtype=float) * grid.bnd_area)
    return A, rhs_bnd


def pcg(A, b, x0=None, tol=1e-10, max_iter=None):
    """Jacobi-preconditioned conjugate gradients.

    Stops when the true residual satisfies
    ``|b - A x|_inf <= tol * (|b|_inf + |A|_inf |x|_inf)``, a relative
    backward-error test that stays attainable when ``b`` is tiny.
    Returns ``(x, relative_residual, iterations, history)``; raises
    :class:`PotentialSolveError` if the tolerance is not reached.
    """
    n = len(b)
    max_iter = max_iter or 10 * n + 100
    bnorm = np.max(np.abs(b))
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        x[:] = 0.0
        return x, 0.0, 0, [0.0]
    anorm = np.max(np.abs(A).sum(axis=1))
    dinv = 1.0 / A.diagonal()
    history = []
    it = 0
    # outer loop restarts from the true residual when the recurrence drifts
    while True:
        r = b - A @ x
        scale = bnorm + anorm * np.max(np.abs(x))
        rel = np.max(np.abs(r)) / scale
        history.append(rel)
        if rel <= tol:
            return x, rel, it, history
        if it >= max_iter:
            raise PotentialSolveError(
                f"CG did not reach tol={tol:g} in {max_iter} iterations "
                f"(relative residual {rel:.3e})", history)
        z = dinv * r
        d = z.copy()
        rz = r @ z
        while it < max_iter:
            q = A @ d
            alpha = rz / (d @ q)
            x += alpha * d
            r -= alpha * q
            it += 1
            rel = np.max(np.abs(r)) / scale
            history.append(rel)
            if rel <= 0.5 * tol:
                break
            z = dinv * r
            rz_new = r @ z
            d = z + (rz_new / rz) * d
            rz = rz_new


class PoissonOperator:
    """Assembled Robin-Laplacian for repeated solves on one grid."""

    def __init__(self, grid: Grid, boundary: BoundaryData, permittivity: float = 1.0):
        self.grid = grid
        self.boundary = boundary
        self.permittivity = float(permittivity)
        self.matrix, self.rhs_boundary = assemble(grid, boundary, permittivity)

    def rhs(self, charge_density):
        return self.grid.cell_volume * np.asarray(charge_density, dtype=float) + self.rhs_boundary

    def solve(self, charge_density, tol=1e-10, x0=None, max_iter=None) -> PotentialSolve:
        phi, res, its, hist = pcg(self.matrix, self.rhs(charge_density), x0=x0, tol=tol,
                                  max_iter=max_iter)
        return PotentialSolve(
            phi=phi,
            grad_phi=self.grid.face_difference(phi),
            boundary_normal_derivative=self.boundary.xi - self.boundary.tau * phi[self.grid.bnd_cell],
            residual_norm=res,
            iterations=its,
            residual_history=hist,
        )

    def energy(self, phi) -> float:
        """``0.5 * eps * (int |grad phi|^2 + int_dOmega tau phi^2)``."""
        phi = np.asarray(phi)
        return 0.5 * float(phi @ (self.matrix @ phi))


def solve_potential(grid: Grid, charge_density, boundary: BoundaryData, tol=1e-10,
                    permittivity=1.0, x0=None, max_iter=None) -> PotentialSolve:
    return PoissonOperator(grid, boundary, permittivity).solve(
        charge_density, tol=tol, x0=x0, max_iter=max_iter)


def laplacian_of(grid: Grid, phi, boundary: BoundaryData | None = None) -> np.ndarray:
    """Discrete Laplacian per cell with the assembly stencil.

    Boundary faces use the Robin closure ``dphi/dn = xi - tau * phi_cell``;
    without boundary data they are treated as insulating.
    """
    phi = np.asarray(phi, dtype=float)
    g = grid.face_difference(phi)
    bflux = None
    if boundary is not None:
        bflux = boundary.xi - boundary.tau * phi[grid.bnd_cell]
    return grid.net_outflow(g, bflux) / grid.cell_volume
