"""Run configuration: YAML text <-> :class:`RunConfig` <-> :class:`ProblemSpec`.

Sections: ``grid``, ``species`` (list), ``reactions``, ``boundary``,
``regularization``, ``time``, ``solver``, ``scales``, ``certificates``,
``sweep``, ``output`` and the top-level ``seed``. Unknown keys anywhere are
rejected. See README.md for the full schema.
"""
from __future__ import annotations

import dataclasses
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .coupling import SolverSettings
from .mesh import Grid, build_grid
from .model import (ConstantDiffusivity, ConstantSource, NoReaction, PeriodicDiffusivity,
                    ProblemSpec, Regularization, ReversiblePair, Scales, SpeciesSpec,
                    TimeRampDiffusivity, boundary_data)


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    dimension: int = 1
    cells: list = field(default_factory=lambda: [32])
    extent: list = field(default_factory=lambda: [1.0])


@dataclass
class SpeciesConfig:
    name: str = "species"
    charge: int = 0
    diffusivity: dict = field(default_factory=lambda: {"kind": "constant", "value": 1.0})
    initial: dict = field(default_factory=lambda: {"kind": "uniform", "value": 1.0})


@dataclass
class BoundaryConfig:
    tau: object = 1.0
    xi: object = 0.0
    xi_exponent: float = float("inf")


@dataclass
class RegularizationConfig:
    eta: float = 0.0
    p: float = 2.0


@dataclass
class TimeConfig:
    final_time: float = 1.0
    dt: float = 0.01
    output_times: list = field(default_factory=list)


@dataclass
class SolverConfig:
    damping: float = 0.8
    tol: float = 1e-9
    max_iter: int = 200
    poisson_tol: float = 1e-14
    inner_tol: float = 1e-11
    inner_max_iter: int = 50
    halve_dt_on_failure: bool = False


@dataclass
class ScalesConfig:
    faraday: float = 1.0
    gas_constant: float = 1.0
    temperature: float = 1.0
    permittivity: float = 1.0


@dataclass
class CertificatesConfig:
    entropy: bool = True
    slack: object = None
    sup_bound: object = None
    mass_control: bool = True


@dataclass
class SweepConfig:
    eta_schedule: list = field(default_factory=list)
    ks: list = field(default_factory=lambda: [2, 4, 8])


@dataclass
class OutputConfig:
    directory: str = "output"


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    species: list = field(default_factory=list)
    reactions: dict = field(default_factory=lambda: {"kind": "none"})
    boundary: BoundaryConfig = field(default_factory=BoundaryConfig)
    regularization: RegularizationConfig = field(default_factory=RegularizationConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    scales: ScalesConfig = field(default_factory=ScalesConfig)
    certificates: CertificatesConfig = field(default_factory=CertificatesConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        sections = {
            "grid": GridConfig, "boundary": BoundaryConfig,
            "regularization": RegularizationConfig, "time": TimeConfig,
            "solver": SolverConfig, "scales": ScalesConfig,
            "certificates": CertificatesConfig, "sweep": SweepConfig,
            "output": OutputConfig,
        }
        _reject_unknown(data, {f.name for f in dataclasses.fields(cls)}, "top level")
        kwargs = {}
        for name, klass in sections.items():
            if name in data:
                kwargs[name] = _section(klass, data[name], name)
        if "species" in data:
            if not isinstance(data["species"], list):
                raise ConfigError("species must be a list")
            kwargs["species"] = [_section(SpeciesConfig, s, f"species[{i}]")
                                 for i, s in enumerate(data["species"])]
        if "reactions" in data:
            if not isinstance(data["reactions"], dict):
                raise ConfigError("reactions must be a mapping")
            kwargs["reactions"] = dict(data["reactions"])
        if "seed" in data:
            kwargs["seed"] = int(data["seed"])
        return cls(**kwargs)


def _reject_unknown(data, allowed, where):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _section(klass, data, where):
    if data is None:
        return klass()
    if not isinstance(data, dict):
        raise ConfigError(f"section {where} must be a mapping")
    _reject_unknown(data, {f.name for f in dataclasses.fields(klass)}, where)
    return klass(**data)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    try:
        return RunConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


# -- building the problem ------------------------------------------------------

def _take(d, where, **defaults):
    d = dict(d)
    kind = d.pop("kind", None)
    _reject_unknown(d, defaults, f"{where} (kind={kind})")
    out = dict(defaults)
    out.update(d)
    return out


def _diffusivity(d, grid: Grid, where):
    kind = d.get("kind", "constant")
    if kind == "constant":
        a = _take(d, where, value=1.0)
        return ConstantDiffusivity(float(a["value"]))
    if kind == "periodic":
        a = _take(d, where, base=1.0, amplitude=0.5, wavenumber=1, axis=0)
        ax = int(a["axis"])
        return PeriodicDiffusivity(float(a["base"]), float(a["amplitude"]), int(a["wavenumber"]),
                                   grid.domain_extent[ax], ax)
    if kind == "time_ramp":
        a = _take(d, where, start=1.0, end=2.0, ramp_time=1.0)
        return TimeRampDiffusivity(float(a["start"]), float(a["end"]), float(a["ramp_time"]))
    raise ConfigError(f"{where}: unknown diffusivity kind {kind!r}")


def _initial(d, grid: Grid, rng, where):
    kind = d.get("kind", "uniform")
    x = grid.centers
    L = np.array(grid.domain_extent)
    if kind == "uniform":
        a = _take(d, where, value=1.0)
        return np.full(grid.n_cells, float(a["value"]))
    if kind == "cosine":
        a = _take(d, where, base=1.0, amplitude=0.5, modes=[1] * grid.dimension)
        modes = np.atleast_1d(a["modes"]).astype(float)
        if len(modes) != grid.dimension:
            raise ConfigError(f"{where}: modes needs one entry per axis")
        prod = np.prod(np.cos(np.pi * modes * x / L), axis=1)
        return float(a["base"]) * (1.0 + float(a["amplitude"]) * prod)
    if kind == "gaussian":
        a = _take(d, where, base=0.0, height=1.0, center=list(0.5 * L), width=0.1)
        r2 = np.sum((x - np.asarray(a["center"], dtype=float)) ** 2, axis=1)
        return float(a["base"]) + float(a["height"]) * np.exp(-r2 / (2.0 * float(a["width"]) ** 2))
    if kind == "random":
        a = _take(d, where, low=0.0, high=1.0)
        return rng.uniform(float(a["low"]), float(a["high"]), grid.n_cells)
    if kind == "values":
        a = _take(d, where, values=[])
        v = np.asarray(a["values"], dtype=float)
        if v.shape != (grid.n_cells,):
            raise ConfigError(f"{where}: expected {grid.n_cells} values")
        return v
    raise ConfigError(f"{where}: unknown initial kind {kind!r}")


def _reactions(d, n_species):
    kind = d.get("kind", "none")
    if kind == "none":
        _take(d, "reactions")
        return NoReaction()
    if kind == "reversible_pair":
        a = _take(d, "reactions", first=0, second=1, rate=1.0)
        i, j = int(a["first"]), int(a["second"])
        if not (0 <= i < n_species and 0 <= j < n_species and i != j):
            raise ConfigError("reactions: reversible_pair needs two distinct species indices")
        return ReversiblePair(i, j, float(a["rate"]))
    if kind == "constant_source":
        a = _take(d, "reactions", rates=[], width=1e-2)
        rates = tuple(float(r) for r in a["rates"])
        if len(rates) != n_species:
            raise ConfigError("reactions: constant_source needs one rate per species")
        return ConstantSource(rates, float(a["width"]))
    raise ConfigError(f"unknown reaction kind {kind!r}")


def build_problem(cfg: RunConfig) -> ProblemSpec:
    try:
        grid = build_grid(int(cfg.grid.dimension), cfg.grid.cells, cfg.grid.extent)
        rng = np.random.default_rng(cfg.seed)
        species = []
        for i, s in enumerate(cfg.species):
            where = f"species[{i}]"
            species.append(SpeciesSpec(
                name=str(s.name),
                charge=int(s.charge),
                diffusivity=_diffusivity(s.diffusivity, grid, where + ".diffusivity"),
                initial=_initial(s.initial, grid, rng, where + ".initial"),
            ))
        boundary = boundary_data(grid, cfg.boundary.tau, cfg.boundary.xi,
                                 float(cfg.boundary.xi_exponent))
        return ProblemSpec(
            grid=grid,
            species=species,
            boundary=boundary,
            reactions=_reactions(cfg.reactions, len(species)),
            regularization=Regularization(float(cfg.regularization.eta),
                                          float(cfg.regularization.p)),
            final_time=float(cfg.time.final_time),
            scales=Scales(**{k: float(v) for k, v in asdict(cfg.scales).items()}),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def solver_settings(cfg: RunConfig) -> SolverSettings:
    s = cfg.solver
    return SolverSettings(damping=float(s.damping), tol=float(s.tol), max_iter=int(s.max_iter),
                          poisson_tol=float(s.poisson_tol), inner_tol=float(s.inner_tol),
                          inner_max_iter=int(s.inner_max_iter),
                          halve_dt_on_failure=bool(s.halve_dt_on_failure))
