"""Vanishing-regularization study.

Runs the solver over a decreasing eta schedule on a common time grid and
measures how fast consecutive solutions approach each other in L1(Q_T),
in L2(Q_T) for square roots, and in L1(Q_T) after truncation by T_k.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coupling import SolverSettings, Trajectory, run
from .diagnostics import InequalityCertificate, check_uniform_eta_bound
from .errors import SolverError
from .mesh import Grid
from .model import ProblemSpec, xlogx

logger = logging.getLogger(__name__)


def _blend(t):
    return t - t ** 3 + 0.5 * t ** 4


def truncate_tk(r, k):
    """Concave C^2 truncation: identity on [0, k], constant k + 1/2 beyond k + 1.

    On ``[k, k + 1]`` it follows ``k + s(r - k)`` with
    ``s(t) = t - t^3 + t^4 / 2``.
    """
    if k < 2:
        raise ValueError("truncation level k must be >= 2")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise ValueError("truncate_tk requires r >= 0")
    t = np.clip(r - k, 0.0, 1.0)
    out = np.where(r <= k, r, k + _blend(t))
    return float(out) if out.ndim == 0 else out


def truncate_tk_prime(r, k):
    r = np.asarray(r, dtype=float)
    t = np.clip(r - k, 0.0, 1.0)
    out = np.where(r <= k, 1.0, 1.0 - 3.0 * t ** 2 + 2.0 * t ** 3)
    return float(out) if out.ndim == 0 else out


@dataclass(eq=False)
class SweepReport:
    eta_schedule: list
    times: np.ndarray
    pairwise_l1: list = field(default_factory=list)
    pairwise_sqrt_l2: list = field(default_factory=list)
    tk_l1: dict = field(default_factory=dict)
    uniform_bound_certificate: InequalityCertificate | None = None
    max_eta_lp: list = field(default_factory=list)
    partial: bool = False
    failures: dict = field(default_factory=dict)

    @property
    def monotone(self) -> bool:
        """True if consecutive gaps strictly decrease (flag only, never an error)."""
        d = self.pairwise_l1
        return all(b < a for a, b in zip(d[:-1], d[1:]))


def validate_schedule(eta_schedule):
    sched = [float(e) for e in eta_schedule]
    if not sched:
        raise ValueError("eta schedule is empty")
    if any(e <= 0 or e >= 1 for e in sched):
        raise ValueError("eta schedule entries must lie in (0, 1)")
    if any(b >= a for a, b in zip(sched[:-1], sched[1:])):
        raise ValueError("eta schedule must be strictly decreasing")
    return sched


def _sweep_job(spec: ProblemSpec, eta, dt, settings):
    traj = run(spec.with_eta(eta), dt, settings=settings)
    c = np.array([s.c for s in traj.states])
    reg = spec.regularization
    eta_lp = eta * spec.grid.cell_volume * np.sum(c ** reg.p, axis=(1, 2))
    return traj.times, c, eta_lp


def _time_weights(times):
    w = np.zeros(len(times))
    dt = np.diff(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def space_time_l1(grid: Grid, times, a, b) -> float:
    """Trapezoidal-in-time, midpoint-in-space ``int_0^T int |a - b|``."""
    per_t = grid.cell_volume * np.sum(np.abs(a - b), axis=tuple(range(1, a.ndim)))
    return float(np.sum(_time_weights(times) * per_t))


def space_time_l2(grid: Grid, times, a, b) -> float:
    per_t = grid.cell_volume * np.sum((a - b) ** 2, axis=tuple(range(1, a.ndim)))
    return float(np.sqrt(np.sum(_time_weights(times) * per_t)))


def eta_sweep(spec: ProblemSpec, eta_schedule, dt, settings: SolverSettings = SolverSettings(),
              ks=(2, 4, 8), jobs=1) -> SweepReport:
    """Run every eta in the schedule with identical data and step size."""
    sched = validate_schedule(eta_schedule)
    results = {}
    failures = {}
    if jobs > 1 and len(sched) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {e: pool.submit(_sweep_job, spec, e, dt, settings) for e in sched}
            for e, fut in futs.items():
                try:
                    results[e] = fut.result()
                except SolverError as exc:
                    failures[e] = str(exc)
    else:
        for e in sched:
            try:
                results[e] = _sweep_job(spec, e, dt, settings)
            except SolverError as exc:
                failures[e] = str(exc)

    done = [e for e in sched if e in results]
    times = results[done[0]][0] if done else np.array([])
    report = SweepReport(eta_schedule=sched, times=times, partial=bool(failures),
                         failures=failures)
    report.max_eta_lp = [float(np.max(results[e][2])) for e in done]
    report.uniform_bound_certificate = check_uniform_eta_bound(
        {e: list(results[e][2]) for e in done})
    report.tk_l1 = {k: [] for k in ks}
    for e0, e1 in zip(done[:-1], done[1:]):
        c0, c1 = results[e0][1], results[e1][1]
        report.pairwise_l1.append(space_time_l1(spec.grid, times, c0, c1))
        report.pairwise_sqrt_l2.append(space_time_l2(spec.grid, times, np.sqrt(c0), np.sqrt(c1)))
        for k in ks:
            report.tk_l1[k].append(space_time_l1(spec.grid, times, truncate_tk(c0, k),
                                                 truncate_tk(c1, k)))
    if not report.monotone:
        logger.warning("eta sweep gaps are not monotone: %s", report.pairwise_l1)
    return report


def l1_continuity_profile(trajectory: Trajectory, grid: Grid, ks=(4, 16, 256)) -> dict:
    """Time-continuity moduli of the truncated concentrations and tail masses.

    For each ``k`` returns the largest L1 jump of ``T_k(c_i)`` between
    adjacent stored times (summed over species), the largest tail mass
    ``int_{c_i >= k} c_i`` over species and times, and the bound
    ``M / log k`` with ``M = max_t sum_i int c_i |log c_i|``.
    """
    c = np.array([np.maximum(s.c, 0.0) for s in trajectory.states])
    vol = grid.cell_volume
    M = float(np.max(vol * np.sum(np.abs(xlogx(c)), axis=(1, 2))))
    table = {}
    for k in ks:
        tk = truncate_tk(c, k)
        jumps = vol * np.sum(np.abs(np.diff(tk, axis=0)), axis=(1, 2))
        tails = vol * np.sum(np.where(c >= k, c, 0.0), axis=2)
        bound = M / np.log(k)
        max_tail = float(np.max(tails))
        table[k] = {
            "max_jump": float(np.max(jumps)) if len(jumps) else 0.0,
            "max_tail": max_tail,
            "tail_bound": bound,
            "holds": max_tail <= bound,
        }
    return table
