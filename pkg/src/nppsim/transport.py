"""Implicit drift-diffusion update for one species in a frozen potential.

The face flux from cell ``a`` to its neighbour ``b`` splits into a linear
drift-diffusion part, discretized with the Scharfetter-Gummel formula

    J_lin = d / delta * (B(x) c_a - B(-x) c_b),   x = z * drift * (phi_b - phi_a),

with ``B(x) = x / (exp(x) - 1)``, plus the central regularization flux
``J_reg = -d * eta / delta * (c_b**p - c_a**p)``. ``J_lin`` vanishes exactly
for the Boltzmann ratio ``c_b = c_a * exp(-x)``. Boundary faces carry no
flux.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .mesh import Grid
from .model import Regularization

logger = logging.getLogger(__name__)

NEGATIVE_TOL = 1e-13


class TransportError(SolverError):
    pass


def bernoulli(x):
    """``x / (exp(x) - 1)`` with the removable singularity filled in."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    with np.errstate(over="ignore"):
        big = xs / np.expm1(xs)
    x2 = x * x
    series = 1.0 - 0.5 * x + x2 / 12.0 - x2 * x2 / 720.0
    out = np.where(small, series, big)
    return float(out) if out.ndim == 0 else out


def face_flux(c_left, c_right, dphi, d_face, z, reg: Regularization, spacing, drift=1.0):
    """Total flux from the left to the right cell across one face."""
    x = z * drift * np.asarray(dphi, dtype=float)
    lin = d_face / spacing * (bernoulli(x) * c_left - bernoulli(-x) * c_right)
    regp = -d_face * reg.eta / spacing * (np.power(c_right, reg.p) - np.power(c_left, reg.p))
    return lin + regp


@dataclass(eq=False)
class FluxField:
    """Face fluxes of every species, shape ``(P, n_faces)``, oriented a -> b.

    ``diffusive + drift + regularization == total``; the drift part is the
    Scharfetter-Gummel flux minus its central-diffusion part.
    """
    total: np.ndarray
    diffusive: np.ndarray
    drift: np.ndarray
    regularization: np.ndarray

    @property
    def boundary(self) -> np.ndarray:
        return np.zeros(self.total.shape[:-1] + (0,))


def compute_fluxes(grid: Grid, c, phi, d_faces, charges, reg: Regularization, drift=1.0) -> FluxField:
    c = np.atleast_2d(np.asarray(c, dtype=float))
    a, b = grid.face_a, grid.face_b
    delta = grid.face_distance
    dphi = phi[b] - phi[a]
    total, diff, drf, rg = [], [], [], []
    for i in range(c.shape[0]):
        ca, cb = c[i, a], c[i, b]
        d = d_faces[i]
        x = charges[i] * drift * dphi
        lin = d / delta * (bernoulli(x) * ca - bernoulli(-x) * cb)
        dif = -d * (cb - ca) / delta
        regp = -d * reg.eta / delta * (np.power(cb, reg.p) - np.power(ca, reg.p))
        total.append(lin + regp)
        diff.append(dif)
        drf.append(lin - dif)
        rg.append(regp)
    return FluxField(np.array(total), np.array(diff), np.array(drf), np.array(rg))


@dataclass(eq=False)
class StepInfo:
    iterations: int = 0
    update_norms: list = field(default_factory=list)
    methods: list = field(default_factory=list)
    mass_defect: float = 0.0


def _sg_matrix(grid: Grid, phi, d_face, z, drift):
    """Net-outflow operator of the linear flux: ``(L c)_cell = sum area * J_lin``."""
    n = grid.n_cells
    a, b = grid.face_a, grid.face_b
    w = grid.face_area * d_face / grid.face_distance
    x = z * drift * (phi[b] - phi[a])
    bp = w * bernoulli(x)
    bm = w * bernoulli(-x)
    diag = np.zeros(n)
    np.add.at(diag, a, bp)
    np.add.at(diag, b, bm)
    rows = np.concatenate([np.arange(n), a, b])
    cols = np.concatenate([np.arange(n), b, a])
    vals = np.concatenate([diag, -bm, -bp])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _graph_laplacian(grid: Grid, weights):
    n = grid.n_cells
    a, b = grid.face_a, grid.face_b
    diag = np.zeros(n)
    np.add.at(diag, a, weights)
    np.add.at(diag, b, weights)
    rows = np.concatenate([np.arange(n), a, b])
    cols = np.concatenate([np.arange(n), b, a])
    vals = np.concatenate([diag, -weights, -weights])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def species_step(grid: Grid, c_old, phi, d_face, z, source, reg: Regularization, dt,
                 drift=1.0, tol=1e-11, max_iter=50, c_guess=None):
    """One backward-Euler step of a single species.

    Solves ``vol * (c - c_old) / dt + div_h J(c) = vol * source`` where
    ``source`` is the (already evaluated, time-lagged) reaction rate per
    cell. Returns ``(c_new, StepInfo)``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    c_old = np.asarray(c_old, dtype=float)
    if np.any(c_old < -NEGATIVE_TOL):
        raise ValueError("species_step needs a nonnegative starting state")
    phi = np.asarray(phi, dtype=float)
    source = np.broadcast_to(np.asarray(source, dtype=float), c_old.shape)
    vol = grid.cell_volume
    n = grid.n_cells

    L = _sg_matrix(grid, phi, d_face, z, drift)
    M = (sp.identity(n, format="csr") * (vol / dt) + L).tocsc()
    rhs = vol * c_old / dt + vol * source
    info = StepInfo()

    if reg.eta == 0.0:
        c = spla.spsolve(M, rhs)
        info.iterations = 1
        info.methods.append("linear")
    else:
        p = reg.p
        K = _graph_laplacian(grid, reg.eta * grid.face_area * d_face / grid.face_distance)
        c = np.maximum(c_old, 0.0) if c_guess is None else np.maximum(np.asarray(c_guess, float), 0.0)
        converged = False
        for it in range(1, max_iter + 1):
            resid = M @ c + K @ np.power(c, p) - rhs
            J = (M + K @ sp.diags(p * np.power(c, p - 1.0))).tocsc()
            c_new = c - spla.spsolve(J, resid)
            method = "newton"
            if np.min(c_new) < 0.0:
                # lag the coefficient c**(p-1): keeps the M-matrix structure
                J = (M + K @ sp.diags(np.power(c, p - 1.0))).tocsc()
                c_new = spla.spsolve(J, rhs)
                method = "picard"
            upd = float(np.max(np.abs(c_new - c)))
            info.update_norms.append(upd)
            info.methods.append(method)
            c = c_new
            if upd <= tol * max(1.0, float(np.max(np.abs(c)))):
                converged = True
                break
        info.iterations = it
        if not converged:
            raise TransportError(
                f"inner iteration did not converge in {max_iter} iterations "
                f"(last update {info.update_norms[-1]:.3e})", info.update_norms)

    cmin = float(np.min(c))
    if cmin < -NEGATIVE_TOL:
        raise TransportError(f"negative concentration {cmin:.3e} after species step",
                             info.update_norms)
    if cmin < 0.0:
        logger.debug("zeroing round-off negatives down to %.2e", cmin)
        c = np.maximum(c, 0.0)
    info.mass_defect = float(vol * np.sum(c - c_old) - dt * vol * np.sum(source))
    return c, info
