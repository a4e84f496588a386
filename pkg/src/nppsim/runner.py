"""Run a problem while recording diagnostics, snapshots and mass balance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coupling import SolverSettings, Trajectory, reaction_rates, run
from .diagnostics import EnergyReport, check_entropy_decay, energy_report, sup_bound_monitor
from .errors import SolverError
from .model import ProblemSpec
from .outputs import snapshot_records


class Recorder:
    """Observer for :func:`coupling.run`.

    Keeps one :class:`EnergyReport` per accepted state, snapshots at the
    first state reaching each requested output time, and the mass ledger
    ``mass(t) - mass(0) - sum dt * int f``. Reactions are lagged in the
    time step, so the source integral uses the rates at the previous state.
    """

    def __init__(self, spec: ProblemSpec, output_times=(), species_names=None):
        self.spec = spec
        self.reports: list[EnergyReport] = []
        self.snapshots: list[dict] = []
        self.pending = sorted(float(t) for t in output_times)
        self.names = species_names or [s.name for s in spec.species]
        self.mass0 = None
        self.source_integral = np.zeros(spec.n_species)
        self.mass_defect = []
        self._prev = None
        self.fixed_point_iterations = []

    def __call__(self, state, report):
        spec = self.spec
        vol = spec.grid.cell_volume
        mass = vol * np.sum(state.c, axis=1)
        if self._prev is None:
            self.mass0 = mass
        else:
            dt = state.t - self._prev.t
            self.source_integral += dt * vol * np.sum(reaction_rates(spec, self._prev), axis=1)
        if report is not None:
            self.fixed_point_iterations.append(report.fixed_point_iterations)
        self.mass_defect.append(mass - self.mass0 - self.source_integral)
        self._prev = state.copy()
        self.reports.append(energy_report(state, spec))
        eps = 1e-9 * max(1.0, spec.final_time)
        while self.pending and state.t >= self.pending[0] - eps:
            self.pending.pop(0)
            self.snapshots.extend(snapshot_records(state.t, state.c, state.phi, self.names))

    def relative_mass_drift(self) -> float:
        if not self.mass_defect:
            return 0.0
        scale = np.maximum(np.abs(self.mass0), np.finfo(float).tiny)
        return float(np.max(np.abs(np.array(self.mass_defect)) / scale))


@dataclass(eq=False)
class RunResult:
    trajectory: Trajectory
    recorder: Recorder
    certificates: dict = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.trajectory.completed

    @property
    def all_hold(self) -> bool:
        return all(c["holds"] for c in self.certificates.values())


def mass_tolerance(spec: ProblemSpec) -> float:
    """Relative tolerance for the mass ledger: tighter without reactions."""
    return 1e-10 if spec.reactions.sup_bound == 0.0 else 1e-9


def simulate(spec: ProblemSpec, dt, settings: SolverSettings = SolverSettings(), output_times=(),
             entropy=True, slack=None, sup_bound=None, mass_control=True,
             keep_states=False) -> RunResult:
    """Run ``spec`` and evaluate the enabled certificates on what was computed.

    Solver failures do not raise; the partial result has
    ``completed == False`` and the error on ``trajectory.error``.
    """
    rec = Recorder(spec, output_times)
    traj = run(spec, dt, observers=[rec], settings=settings, keep_states=keep_states,
               raise_on_failure=False)
    certs = {}
    if entropy:
        certs["entropy"] = check_entropy_decay(rec.reports, spec, slack).summary()
    if sup_bound is not None:
        certs["sup_bound"] = sup_bound_monitor(rec.reports, float(sup_bound)).summary()
    if mass_control:
        drift = rec.relative_mass_drift()
        tol = mass_tolerance(spec)
        certs["mass_control"] = {"kind": "mass-control", "holds": drift <= tol,
                                 "worst_margin": tol - drift, "worst_index": -1,
                                 "constants_used": {"relative_tol": tol, "drift": drift}}
    return RunResult(traj, rec, certs)


def failure_message(result: RunResult) -> str | None:
    err = result.trajectory.error
    if err is None:
        return None
    return f"{type(err).__name__}: {err}" if isinstance(err, SolverError) else str(err)
