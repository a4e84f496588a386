"""Problem data: species, reactions, boundary data and the regularization.

The regularized constitutive function is ``h(r) = r + eta * r**p`` and the
matching entropy density is

    psi(r) = r log r - r + 1 + eta / (p - 1) * r**p,

chosen so that ``r * psi''(r) == h'(r)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .mesh import SIDE_NAMES, Grid

_TINY = 1e-300


@dataclass(frozen=True)
class Regularization:
    eta: float = 0.0
    p: float = 2.0


@dataclass(frozen=True)
class Scales:
    """Physical constants; the defaults give the nondimensional system."""
    faraday: float = 1.0
    gas_constant: float = 1.0
    temperature: float = 1.0
    permittivity: float = 1.0

    @property
    def drift(self) -> float:
        """Coefficient F/(R T) in front of the migration term."""
        return self.faraday / (self.gas_constant * self.temperature)

    @property
    def electric_energy_weight(self) -> float:
        """Weight eps/(R T) of the field energy in the free energy."""
        return self.permittivity / (self.gas_constant * self.temperature)


def _nonnegative(r, what):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise ValueError(f"{what} requires r >= 0")
    return r


def _out(r, value):
    return float(value) if np.ndim(r) == 0 else value


def h_eval(r, reg: Regularization):
    r = _nonnegative(r, "h")
    return _out(r, r + reg.eta * r ** reg.p)


def h_prime(r, reg: Regularization):
    r = _nonnegative(r, "h'")
    return _out(r, 1.0 + reg.eta * reg.p * r ** (reg.p - 1.0))


def xlogx(r):
    r = np.asarray(r, dtype=float)
    safe = np.where(r < _TINY, 1.0, r)
    return np.where(r < _TINY, 0.0, r * np.log(safe))


def psi_eval(r, reg: Regularization):
    r = _nonnegative(r, "psi")
    val = xlogx(r) - r + 1.0 + reg.eta / (reg.p - 1.0) * r ** reg.p
    return _out(r, val)


def psi_prime(r, reg: Regularization):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("psi' is unbounded at r = 0")
    return _out(r, np.log(r) + reg.eta * reg.p / (reg.p - 1.0) * r ** (reg.p - 1.0))


def psi_second(r, reg: Regularization):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(np.isnan(r)):
        raise ValueError("psi'' is defined for r > 0 only")
    return _out(r, 1.0 / r + reg.eta * reg.p * r ** (reg.p - 2.0))


# -- diffusivities -----------------------------------------------------------

@dataclass(frozen=True)
class ConstantDiffusivity:
    value: float = 1.0

    def __call__(self, t, x):
        return np.full(len(x), float(self.value))

    @property
    def bounds(self):
        return self.value, self.value


@dataclass(frozen=True)
class PeriodicDiffusivity:
    """``base * (1 + amplitude * cos(2 pi k x / length))`` along one axis."""
    base: float = 1.0
    amplitude: float = 0.5
    wavenumber: int = 1
    length: float = 1.0
    axis: int = 0

    def __call__(self, t, x):
        x = np.atleast_2d(x)
        arg = 2.0 * np.pi * self.wavenumber * x[:, self.axis] / self.length
        return self.base * (1.0 + self.amplitude * np.cos(arg))

    @property
    def bounds(self):
        a = abs(self.amplitude)
        return self.base * (1.0 - a), self.base * (1.0 + a)


@dataclass(frozen=True)
class TimeRampDiffusivity:
    """Linear ramp from ``start`` to ``end`` over ``[0, ramp_time]``, then constant."""
    start: float = 1.0
    end: float = 2.0
    ramp_time: float = 1.0

    def __call__(self, t, x):
        s = min(max(t / self.ramp_time, 0.0), 1.0)
        return np.full(len(x), self.start + (self.end - self.start) * s)

    @property
    def bounds(self):
        return min(self.start, self.end), max(self.start, self.end)


# -- reactions ---------------------------------------------------------------

@dataclass(frozen=True)
class NoReaction:
    def __call__(self, t, x, c):
        return np.zeros_like(np.asarray(c, dtype=float))

    @property
    def sup_bound(self) -> float:
        return 0.0


@dataclass(frozen=True)
class ReversiblePair:
    """Bounded conversion ``f_first = -f_second = rate * tanh(c_second - c_first)``."""
    first: int = 0
    second: int = 1
    rate: float = 1.0

    def __call__(self, t, x, c):
        c = np.asarray(c, dtype=float)
        f = np.zeros_like(c)
        r = self.rate * np.tanh(c[self.second] - c[self.first])
        f[self.first] = r
        f[self.second] = -r
        return f

    @property
    def sup_bound(self) -> float:
        return abs(self.rate)


@dataclass(frozen=True)
class ConstantSource:
    """Constant rates; sinks are switched off linearly below ``c_i = width``."""
    rates: tuple = ()
    width: float = 1e-2

    def __call__(self, t, x, c):
        c = np.asarray(c, dtype=float)
        s = np.asarray(self.rates, dtype=float)[:, None]
        clip = np.clip(c / self.width, 0.0, 1.0)
        return np.where(s >= 0, s, s * clip) * np.ones_like(c)

    @property
    def sup_bound(self) -> float:
        return float(np.max(np.abs(self.rates))) if len(self.rates) else 0.0


# -- boundary, species, problem ------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Robin data per boundary face: dPhi/dn + tau * Phi = xi."""
    tau: np.ndarray
    xi: np.ndarray
    xi_exponent: float = float("inf")


def _per_face(grid: Grid, value, name):
    if isinstance(value, dict):
        unknown = set(value) - set(SIDE_NAMES[: 2 * grid.dimension])
        if unknown:
            raise ValueError(f"unknown boundary sides for {name}: {sorted(unknown)}")
        out = np.zeros(grid.n_boundary_faces)
        for side, v in value.items():
            out[grid.side_mask(side)] = float(v)
        return out
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.n_boundary_faces, float(arr))
    if arr.shape != (grid.n_boundary_faces,):
        raise ValueError(f"{name} must be scalar, per-side dict or one value per boundary face")
    return arr.copy()


def boundary_data(grid: Grid, tau=1.0, xi=0.0, xi_exponent=float("inf")) -> BoundaryData:
    """Build Robin data from scalars, ``{side: value}`` dicts or per-face arrays."""
    t = _per_face(grid, tau, "tau")
    x = _per_face(grid, xi, "xi")
    t.setflags(write=False)
    x.setflags(write=False)
    return BoundaryData(tau=t, xi=x, xi_exponent=float(xi_exponent))


@dataclass(frozen=True, eq=False)
class SpeciesSpec:
    name: str
    charge: int
    diffusivity: object
    initial: np.ndarray


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    grid: Grid
    species: Sequence[SpeciesSpec]
    boundary: BoundaryData
    reactions: object = field(default_factory=NoReaction)
    regularization: Regularization = field(default_factory=Regularization)
    final_time: float = 1.0
    scales: Scales = field(default_factory=Scales)

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def charges(self) -> np.ndarray:
        return np.array([s.charge for s in self.species], dtype=float)

    def initial_concentrations(self) -> np.ndarray:
        return np.array([np.asarray(s.initial, dtype=float) for s in self.species])

    def diffusivity_faces(self, t) -> np.ndarray:
        """Diffusivity per species evaluated at interior face centers."""
        return np.array([s.diffusivity(t, self.grid.face_centers) for s in self.species])

    def with_eta(self, eta) -> "ProblemSpec":
        return replace(self, regularization=replace(self.regularization, eta=float(eta)))


def validate(spec: ProblemSpec, n_samples: int = 64) -> list:
    """Check the structural hypotheses on a deterministic sample set.

    Returns a list of human-readable violations; an empty list means the
    problem is admissible.
    """
    problems = []
    grid = spec.grid
    reg = spec.regularization
    if not spec.species:
        problems.append("at least one species is required")
    if not spec.final_time > 0:
        problems.append(f"final_time must be positive, got {spec.final_time}")
    if not (0.0 <= reg.eta < 1.0):
        problems.append(f"eta must lie in [0, 1), got {reg.eta}")
    if reg.p < 2:
        problems.append(f"p must be >= 2, got {reg.p}")
    if not reg.p > grid.dimension / 2:
        problems.append(f"p must exceed N/2 = {grid.dimension / 2}, got {reg.p}")

    tau = np.asarray(spec.boundary.tau)
    if np.any(tau < 0):
        problems.append("tau must be nonnegative on every boundary face")
    if not np.any(tau > 0):
        problems.append(("tau identically zero: violates the boundary capacity hypothesis "
                         "tau not identically 0"))
    if not np.all(np.isfinite(spec.boundary.xi)):
        problems.append("xi must be finite")

    times = np.linspace(0.0, spec.final_time if spec.final_time > 0 else 1.0, 5)
    points = np.vstack([grid.centers, grid.face_centers])
    for s in spec.species:
        c0 = np.asarray(s.initial, dtype=float)
        if c0.shape != (grid.n_cells,):
            problems.append(f"{s.name}: initial concentration needs one value per cell")
            continue
        if np.any(c0 < 0) or not np.all(np.isfinite(c0)):
            problems.append(f"{s.name}: initial concentration must be finite and >= 0")
        lo, hi = s.diffusivity.bounds
        if not (0 < lo <= hi):
            problems.append(f"{s.name}: diffusivity bounds must satisfy 0 < d_lo <= d_hi")
        for t in times:
            d = s.diffusivity(t, points)
            if np.any(d < lo * (1 - 1e-12)) or np.any(d > hi * (1 + 1e-12)):
                problems.append(f"{s.name}: diffusivity leaves its declared bounds at t={t}")
                break

    P = spec.n_species
    if P:
        rng = np.random.default_rng(0)
        cf = spec.reactions.sup_bound
        x = grid.centers[:1]
        y = rng.uniform(0.0, 10.0, size=(P, n_samples))
        for t in times:
            f = np.asarray(spec.reactions(t, x, y))
            if np.any(np.abs(f) > cf * (1 + 1e-12)):
                problems.append(f"reaction rates exceed the declared bound C_f={cf}")
                break
        for i in range(P):
            yi = y.copy()
            yi[i] = 0.0
            f = np.asarray(spec.reactions(0.0, x, yi))
            if np.any(f[i] < 0):
                problems.append(f"quasi-positivity violated for species {i}: f_i < 0 at c_i = 0")
    return problems
