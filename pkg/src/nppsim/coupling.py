"""Per-step fixed-point coupling of transport and electrostatics.

One application of the coupling map takes a trial potential, advances every
species against it, and re-solves the Poisson problem with the resulting
charge. :func:`advance` iterates the damped map

    phi <- (1 - theta) * phi + theta * T(phi)

until successive potentials agree to ``tol`` in the max norm.
"""
from __future__ import annotations

import logging
import weakref
from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError
from .model import ProblemSpec
from .poisson import PoissonOperator, PotentialSolve
from .transport import species_step

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverSettings:
    damping: float = 0.8
    tol: float = 1e-9
    max_iter: int = 200
    poisson_tol: float = 1e-14
    inner_tol: float = 1e-11
    inner_max_iter: int = 50
    halve_dt_on_failure: bool = False
    max_halvings: int = 6


@dataclass(eq=False)
class State:
    t: float
    c: np.ndarray
    phi: np.ndarray
    last_solve: PotentialSolve | None = None

    def copy(self) -> "State":
        return State(self.t, self.c.copy(), self.phi.copy(), self.last_solve)


@dataclass(eq=False)
class StepReport:
    fixed_point_iterations: int = 0
    phi_update_norms: list = field(default_factory=list)
    dt_used: float = 0.0
    converged: bool = False
    species_info: list = field(default_factory=list)


class CouplingError(SolverError):
    pass


_operators = weakref.WeakKeyDictionary()


def poisson_operator(spec: ProblemSpec) -> PoissonOperator:
    """Assembled Robin-Laplacian for ``spec``, cached per problem."""
    op = _operators.get(spec)
    if op is None:
        op = PoissonOperator(spec.grid, spec.boundary, spec.scales.permittivity)
        _operators[spec] = op
    return op


def charge_density(spec: ProblemSpec, c) -> np.ndarray:
    return spec.scales.faraday * (spec.charges @ np.asarray(c))


def initial_state(spec: ProblemSpec, settings: SolverSettings = SolverSettings()) -> State:
    c0 = spec.initial_concentrations()
    solve = poisson_operator(spec).solve(charge_density(spec, c0), tol=settings.poisson_tol)
    return State(0.0, c0, solve.phi, solve)


def reaction_rates(spec: ProblemSpec, state: State) -> np.ndarray:
    """Reaction rates per species and cell, evaluated at the state's time."""
    return np.asarray(spec.reactions(state.t, spec.grid.centers, state.c), dtype=float)


def fixed_point_map(state: State, dt, spec: ProblemSpec, phi=None,
                    settings: SolverSettings = SolverSettings(), c_guess=None):
    """Apply the coupling map once to the trial potential ``phi``.

    Returns ``(candidate_c, candidate_solve, species_info)``; the default
    trial potential is ``state.phi``.
    """
    phi = state.phi if phi is None else phi
    t_new = state.t + dt
    d_faces = spec.diffusivity_faces(t_new)
    rates = reaction_rates(spec, state)
    drift = spec.scales.drift
    out = np.empty_like(state.c)
    infos = []
    for i, s in enumerate(spec.species):
        guess = None if c_guess is None else c_guess[i]
        out[i], info = species_step(
            spec.grid, state.c[i], phi, d_faces[i], s.charge, rates[i],
            spec.regularization, dt, drift=drift, tol=settings.inner_tol,
            max_iter=settings.inner_max_iter, c_guess=guess)
        infos.append(info)
    solve = poisson_operator(spec).solve(charge_density(spec, out), tol=settings.poisson_tol,
                                         x0=phi)
    return out, solve, infos


def advance(state: State, dt, spec: ProblemSpec, settings: SolverSettings = SolverSettings()):
    """Advance one time step by damped fixed-point iteration on the potential.

    The accepted pair is the last candidate concentration together with its
    own Poisson solution, so the returned state satisfies the discrete
    Poisson equation to solver tolerance.
    """
    theta = settings.damping
    if not (0.0 < theta <= 1.0):
        raise ValueError("damping must lie in (0, 1]")
    if settings.tol <= 0:
        raise ValueError("tol must be positive")
    report = StepReport(dt_used=dt)
    phi = state.phi.copy()
    c_guess = None
    uncoupled = not np.any(spec.charges)
    for k in range(1, settings.max_iter + 1):
        c_new, solve, infos = fixed_point_map(state, dt, spec, phi, settings, c_guess)
        c_guess = c_new
        phi_next = (1.0 - theta) * phi + theta * solve.phi
        delta = float(np.max(np.abs(phi_next - phi)))
        report.phi_update_norms.append(delta)
        report.fixed_point_iterations = k
        report.species_info = infos
        if uncoupled or delta <= settings.tol:
            report.converged = True
            return State(state.t + dt, c_new, solve.phi, solve), report
        phi = phi_next
    raise CouplingError(
        f"fixed-point iteration did not converge in {settings.max_iter} iterations "
        f"(last update {report.phi_update_norms[-1]:.3e})", report.phi_update_norms)


@dataclass(eq=False)
class Trajectory:
    states: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    completed: bool = False
    error: Exception | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> State:
        return self.states[-1]


def run(spec: ProblemSpec, dt, observers=(), settings: SolverSettings = SolverSettings(),
        keep_states=True, raise_on_failure=True) -> Trajectory:
    """Integrate from t = 0 to ``spec.final_time`` with step ``dt``.

    Each observer is called as ``observer(state, report)`` after every
    accepted step (``report`` is None for the initial state). On failure the
    partial trajectory is kept; it is attached to the raised error as
    ``error.trajectory`` or returned when ``raise_on_failure`` is False.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    traj = Trajectory()
    state = initial_state(spec, settings)
    traj.states.append(state)
    for obs in observers:
        obs(state, None)
    T = spec.final_time
    eps_t = 1e-12 * max(T, dt)
    n = 0
    while state.t < T - eps_t:
        # step times are n * dt, not accumulated sums, so output times land exactly
        n += 1
        t_next = n * dt if n * dt < T - eps_t else T
        h = t_next - state.t
        try:
            new, report = _advance_with_halving(state, h, spec, settings)
        except SolverError as exc:
            traj.error = exc
            logger.error("step from t=%g failed: %s", state.t, exc)
            if raise_on_failure:
                exc.trajectory = traj
                raise
            return traj
        new.t = t_next
        state = new
        if keep_states:
            traj.states.append(state)
        else:
            traj.states = [traj.states[0], state]
        traj.reports.append(report)
        for obs in observers:
            obs(state, report)
    traj.completed = True
    return traj


def _advance_with_halving(state, dt, spec, settings):
    if not settings.halve_dt_on_failure:
        return advance(state, dt, spec, settings)
    # substeps of dt / 2**k, reported as one step of size dt
    for k in range(settings.max_halvings + 1):
        n_sub = 2 ** k
        h = dt / n_sub
        try:
            s = state
            total = StepReport(dt_used=h)
            for _ in range(n_sub):
                s, rep = advance(s, h, spec, settings)
                total.fixed_point_iterations += rep.fixed_point_iterations
                total.phi_update_norms.extend(rep.phi_update_norms)
                total.species_info = rep.species_info
            total.converged = True
            return s, total
        except SolverError:
            if k == settings.max_halvings:
                raise
            logger.info("halving dt to %g at t=%g", h / 2, state.t)
