"""Free energy, dissipation and the inequality certificates built on them.

All integrals use midpoint quadrature: cell values for volume integrals,
two-point differences on faces (weighted by area times spacing) for
gradient integrals, and the adjacent cell value on boundary faces.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coupling import State, charge_density, poisson_operator
from .mesh import CutoffField, Grid
from .model import ProblemSpec, psi_eval, xlogx
from .poisson import laplacian_of
from .transport import compute_fluxes

CSV_SCHEMA_VERSION = 1
FLOOR_FACTOR = 1e-12


@dataclass(eq=False)
class EnergyReport:
    t: float
    V: float
    D: float
    masses: np.ndarray
    eta_lp: float
    entropy_l1: float
    sup_c: float
    w132_seminorm: float
    l2_laplacian_phi: float
    V_chemical: float = 0.0
    V_electric: float = 0.0

    @staticmethod
    def header(n_species: int) -> list:
        return (["t", "V", "D"] + [f"mass_{i + 1}" for i in range(n_species)]
                + ["eta_lp", "entropy_l1", "sup_c", "w132", "l2_lap_phi"])

    def row(self) -> list:
        return ([self.t, self.V, self.D] + [float(m) for m in self.masses]
                + [self.eta_lp, self.entropy_l1, self.sup_c, self.w132_seminorm,
                   self.l2_laplacian_phi])


@dataclass(eq=False)
class InequalityCertificate:
    kind: str
    holds: bool
    worst_margin: float
    constants_used: dict = field(default_factory=dict)
    margins: list = field(default_factory=list)
    worst_index: int = -1

    def summary(self) -> dict:
        return {"kind": self.kind, "holds": bool(self.holds),
                "worst_margin": float(self.worst_margin),
                "worst_index": int(self.worst_index),
                "constants_used": {k: float(v) for k, v in self.constants_used.items()}}


def dissipation_floor(spec: ProblemSpec) -> float:
    c0 = spec.initial_concentrations()
    return FLOOR_FACTOR * float(np.mean(c0))


def harmonic_face(grid: Grid, c) -> np.ndarray:
    ca, cb = c[..., grid.face_a], c[..., grid.face_b]
    s = ca + cb
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(s > 0, 2.0 * ca * cb / np.where(s > 0, s, 1.0), 0.0)


def cell_gradient(grid: Grid, u) -> np.ndarray:
    """Cell-centred gradient, shape ``(dim, n_cells)``, from neighbouring face differences."""
    g = grid.face_difference(u)
    out = np.zeros((grid.dimension, grid.n_cells))
    for ax in range(grid.dimension):
        m = grid.face_axis == ax
        acc = np.zeros(grid.n_cells)
        cnt = np.zeros(grid.n_cells)
        np.add.at(acc, grid.face_a[m], g[m])
        np.add.at(acc, grid.face_b[m], g[m])
        np.add.at(cnt, grid.face_a[m], 1.0)
        np.add.at(cnt, grid.face_b[m], 1.0)
        out[ax] = acc / cnt
    return out


def free_energy(state: State, spec: ProblemSpec):
    """Return ``(V, chemical part, electric part)``."""
    vol = spec.grid.cell_volume
    chem = float(vol * np.sum(psi_eval(np.maximum(state.c, 0.0), spec.regularization)))
    elec = poisson_operator(spec).energy(state.phi) / (spec.scales.gas_constant
                                                      * spec.scales.temperature)
    return chem + elec, chem, elec


def dissipation(state: State, spec: ProblemSpec, c_floor=None) -> float:
    """``sum_i int |J_i|^2 / (d_i c_i)`` on faces, harmonic-mean face concentration.

    Faces next to a cell below ``c_floor`` (or next to an empty cell)
    contribute zero.
    """
    grid = spec.grid
    c_floor = dissipation_floor(spec) if c_floor is None else c_floor
    d_faces = spec.diffusivity_faces(state.t)
    J = compute_fluxes(grid, state.c, state.phi, d_faces, spec.charges,
                       spec.regularization, spec.scales.drift).total
    cf = harmonic_face(grid, state.c)
    keep = (np.minimum(state.c[:, grid.face_a], state.c[:, grid.face_b]) >= c_floor) & (cf > 0)
    w = grid.face_area * grid.face_distance
    with np.errstate(invalid="ignore", divide="ignore"):
        integrand = np.where(keep, J * J / (d_faces * np.where(keep, cf, 1.0)), 0.0)
    return float(np.sum(w * integrand))


def w132_seminorm(grid: Grid, c) -> float:
    """``sum_i || grad c_i ||_{L^{3/2}}``."""
    total = 0.0
    for ci in np.atleast_2d(c):
        g = np.sqrt(np.sum(cell_gradient(grid, ci) ** 2, axis=0))
        total += (grid.cell_volume * np.sum(g ** 1.5)) ** (2.0 / 3.0)
    return float(total)


def energy_report(state: State, spec: ProblemSpec, c_floor=None) -> EnergyReport:
    grid = spec.grid
    reg = spec.regularization
    vol = grid.cell_volume
    c = np.maximum(state.c, 0.0)
    V, chem, elec = free_energy(state, spec)
    lap = laplacian_of(grid, state.phi, spec.boundary)
    return EnergyReport(
        t=float(state.t),
        V=V,
        D=dissipation(state, spec, c_floor),
        masses=vol * np.sum(c, axis=1),
        eta_lp=float(reg.eta * vol * np.sum(c ** reg.p)),
        entropy_l1=float(vol * np.sum(np.abs(xlogx(c)))),
        sup_c=float(np.max(c)),
        w132_seminorm=w132_seminorm(grid, c),
        l2_laplacian_phi=float(vol * np.sum(lap * lap)),
        V_chemical=chem,
        V_electric=elec,
    )


def gronwall_constant(spec: ProblemSpec, sup_c: float) -> float:
    """``P * C_f * (1 + |Omega| + max(1, eta p/(p-1) sup_c^(p-1)))``.

    One admissible choice of the growth constant in the dissipation
    inequality for bounded reactions; not claimed sharp.
    """
    reg = spec.regularization
    cf = spec.reactions.sup_bound
    reg_term = reg.eta * reg.p / (reg.p - 1.0) * sup_c ** (reg.p - 1.0)
    return spec.n_species * cf * (1.0 + spec.grid.volume + max(1.0, reg_term))


def check_entropy_decay(reports, spec: ProblemSpec, slack=None) -> InequalityCertificate:
    """Certify per-step decay (no reactions) or Gronwall growth (bounded reactions).

    ``slack`` defaults to ``1e-8 * V(0)``.
    """
    reports = list(reports)
    if slack is None:
        slack = 1e-8 * reports[0].V if reports else 0.0
    cf = spec.reactions.sup_bound
    margins = []
    cg_max = 0.0
    for r0, r1 in zip(reports[:-1], reports[1:]):
        dV = r1.V - r0.V
        if cf == 0.0:
            margins.append(slack - dV)
        else:
            cg = gronwall_constant(spec, max(r0.sup_c, r1.sup_c))
            cg_max = max(cg_max, cg)
            margins.append((r1.t - r0.t) * cg * (1.0 + r0.V) + slack - dV)
    kind = "entropy-decay" if cf == 0.0 else "gronwall"
    constants = {"slack": slack, "C_f": cf}
    if cf:
        constants["C_G_max"] = cg_max
    if not margins:
        return InequalityCertificate(kind, True, 0.0, constants)
    worst = int(np.argmin(margins))
    return InequalityCertificate(kind, margins[worst] >= 0.0, float(margins[worst]),
                                 constants, margins, worst)


def _max_eta_lp(item):
    vals = [r.eta_lp if hasattr(r, "eta_lp") else float(r) for r in item]
    return max(vals) if vals else 0.0


def check_uniform_eta_bound(sweep) -> InequalityCertificate:
    """Certify ``max_t eta * int c^p`` against one constant across an eta sweep.

    ``sweep`` maps eta to a sequence of reports (or of eta_lp values). The
    constant is twice the largest value of the largest-eta run and is fixed
    before the smaller-eta runs are inspected.
    """
    etas = sorted(sweep, reverse=True)
    if not etas:
        return InequalityCertificate("uniform-eta-bound", True, 0.0)
    c_unif = 2.0 * _max_eta_lp(sweep[etas[0]])
    margins = [c_unif - _max_eta_lp(sweep[e]) for e in etas]
    worst = int(np.argmin(margins))
    return InequalityCertificate("uniform-eta-bound", margins[worst] >= 0.0,
                                 float(margins[worst]),
                                 {"C_unif": c_unif, "eta_max": etas[0]}, margins, worst)


def cutoff_dissipation(state: State, spec: ProblemSpec, zeta: CutoffField, c_floor=None) -> dict:
    """Cutoff-weighted integrands of the local dissipation estimate.

    Returns the four zeta^2-weighted integrals summed over species:
    ``grad_c_sq_over_c``, ``drift_sq_over_c``, ``eta_grad_c_half_p_sq`` and
    ``laplacian_phi_sq``.
    """
    grid = spec.grid
    reg = spec.regularization
    c = np.maximum(state.c, 0.0)
    c_floor = dissipation_floor(spec) if c_floor is None else c_floor
    z2 = np.asarray(zeta.values) ** 2
    z2f = 0.5 * (z2[grid.face_a] + z2[grid.face_b])
    w = grid.face_area * grid.face_distance * z2f
    cf = harmonic_face(grid, c)
    keep = (np.minimum(c[:, grid.face_a], c[:, grid.face_b]) >= c_floor) & (cf > 0)
    safe = np.where(keep, cf, 1.0)
    dc = grid.face_difference(c)
    dphi = grid.face_difference(state.phi)
    dcp = grid.face_difference(c ** reg.p)
    dchalf = grid.face_difference(c ** (0.5 * reg.p))
    drift = spec.scales.drift * spec.charges[:, None]
    t1 = np.where(keep, dc ** 2 / safe, 0.0)
    t2 = np.where(keep, (reg.eta * dcp + drift * cf * dphi) ** 2 / safe, 0.0)
    t3 = reg.eta * dchalf ** 2
    lap = laplacian_of(grid, state.phi, spec.boundary)
    return {
        "grad_c_sq_over_c": float(np.sum(w * t1)),
        "drift_sq_over_c": float(np.sum(w * t2)),
        "eta_grad_c_half_p_sq": float(np.sum(w * t3)),
        "laplacian_phi_sq": float(grid.cell_volume * np.sum(z2 * lap * lap)),
    }


def sup_bound_monitor(reports, K: float) -> InequalityCertificate:
    """Certify ``max_t sup_c(t) <= K`` and record when sup_c stops increasing."""
    sup = np.array([r.sup_c for r in reports])
    times = np.array([r.t for r in reports])
    if not len(sup):
        return InequalityCertificate("sup-bound", True, float(K), {"K": K})
    margins = list(K - sup)
    worst = int(np.argmin(margins))
    increases = np.nonzero(np.diff(sup) > 1e-12 * np.maximum(1.0, sup[:-1]))[0]
    start = times[increases[-1] + 1] if len(increases) else times[0]
    return InequalityCertificate("sup-bound", margins[worst] >= 0.0, float(margins[worst]),
                                 {"K": K, "nonincreasing_after": float(start),
                                  "max_sup_c": float(sup.max())}, margins, worst)


def integrated_dissipation(reports) -> float:
    """Right-endpoint time integral of D, matching backward Euler."""
    return float(sum((r1.t - r0.t) * r1.D for r0, r1 in zip(reports[:-1], reports[1:])))


def charge_consistency(state: State, spec: ProblemSpec) -> float:
    """Max-norm residual of ``-eps * Lap(phi) = rho`` for the state."""
    lap = laplacian_of(spec.grid, state.phi, spec.boundary)
    rho = charge_density(spec, state.c)
    return float(np.max(np.abs(-spec.scales.permittivity * lap - rho)))
