"""Command-line interface.

Commands: ``run <config>``, ``sweep <config>``, ``verify [dir]`` and
``equilibrium <config>``. Exit codes: 0 success, 2 configuration error,
3 solver failure, 4 certificate or verification failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ConfigError, build_problem, load_config, solver_settings
from .continuation import eta_sweep, validate_schedule
from .diagnostics import EnergyReport
from .errors import SolverError
from .model import validate
from .oracle import OracleError
from .outputs import (read_ndjson, snapshot_records, write_csv, write_ndjson,
                      write_summary)
from .runner import failure_message, simulate
from .verification import (equilibrium_of, long_time_match, max_flux_at, oracle_step_difference,
                           poisson_mms)

logger = logging.getLogger("nppsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CERTIFICATE = 4


def _fail(msg, code):
    print(f"error: {msg}", file=sys.stderr)
    return code


def _load(path):
    """Config, problem and settings, or raise ConfigError with every violation."""
    cfg = load_config(path)
    spec = build_problem(cfg)
    problems = validate(spec)
    if cfg.time.dt is None or float(cfg.time.dt) <= 0:
        problems.append("time.dt must be positive")
    if problems:
        raise ConfigError("; ".join(problems))
    try:
        settings = solver_settings(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, spec, settings


def _output_dir(cfg, override):
    out = Path(override) if override else Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(config_path, output_dir=None) -> int:
    try:
        cfg, spec, settings = _load(config_path)
    except ConfigError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    out = _output_dir(cfg, output_dir)
    c = cfg.certificates
    result = simulate(spec, float(cfg.time.dt), settings, cfg.time.output_times,
                      entropy=bool(c.entropy), slack=c.slack, sup_bound=c.sup_bound,
                      mass_control=bool(c.mass_control))
    rec = result.recorder
    write_csv(out / "diagnostics.csv", EnergyReport.header(spec.n_species),
              [r.row() for r in rec.reports])
    write_ndjson(out / "snapshots.ndjson", rec.snapshots)
    final = result.trajectory.final
    summary = {
        "command": "run",
        "completed": result.completed,
        "error": failure_message(result),
        "final_time": float(final.t),
        "steps": len(rec.reports) - 1,
        "fixed_point_iterations": {"total": int(sum(rec.fixed_point_iterations)),
                                   "max": int(max(rec.fixed_point_iterations, default=0))},
        "relative_mass_drift": rec.relative_mass_drift(),
        "certificates": result.certificates,
    }
    write_summary(out / "summary.yaml", summary)
    if not result.completed:
        return _fail(summary["error"], EXIT_SOLVER)
    failed = [k for k, v in result.certificates.items() if not v["holds"]]
    if failed:
        return _fail(f"certificates failed: {', '.join(failed)}", EXIT_CERTIFICATE)
    logger.info("run finished at t=%g; certificates hold", final.t)
    return EXIT_OK


def cmd_sweep(config_path, output_dir=None, jobs=1) -> int:
    try:
        cfg, spec, settings = _load(config_path)
        schedule = validate_schedule(cfg.sweep.eta_schedule)
        ks = [int(k) for k in cfg.sweep.ks]
        if any(k < 2 for k in ks):
            raise ValueError("sweep.ks entries must be >= 2")
    except (ConfigError, ValueError) as exc:
        return _fail(str(exc), EXIT_CONFIG)
    out = _output_dir(cfg, output_dir)
    report = eta_sweep(spec, schedule, float(cfg.time.dt), settings, ks=ks, jobs=jobs)
    done = [e for e in schedule if e not in report.failures]
    header = ["pair", "eta_a", "eta_b", "l1", "sqrt_l2"] + [f"tk_l1_k{k}" for k in ks]
    rows = []
    for i, (a, b) in enumerate(zip(done[:-1], done[1:])):
        rows.append([i, a, b, report.pairwise_l1[i], report.pairwise_sqrt_l2[i]]
                    + [report.tk_l1[k][i] for k in ks])
    write_csv(out / "sweep.csv", header, rows)
    d = report.pairwise_l1
    summary = {
        "command": "sweep",
        "eta_schedule": schedule,
        "completed": not report.partial,
        "failures": {str(k): v for k, v in report.failures.items()},
        "pairwise_l1": d,
        "monotone": report.monotone,
        "last_over_first": d[-1] / d[0] if len(d) >= 1 and d[0] > 0 else None,
        "max_eta_lp": report.max_eta_lp,
        "certificates": {"uniform_eta_bound": report.uniform_bound_certificate.summary()},
    }
    write_summary(out / "summary.yaml", summary)
    if report.partial:
        return _fail(f"sweep incomplete: {report.failures}", EXIT_SOLVER)
    if not report.uniform_bound_certificate.holds:
        return _fail("uniform eta bound failed", EXIT_CERTIFICATE)
    if not report.monotone:
        logger.warning("pairwise L1 gaps are not strictly decreasing")
    return EXIT_OK


def cmd_equilibrium(config_path, output_dir=None) -> int:
    try:
        cfg, spec, settings = _load(config_path)
    except ConfigError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    out = _output_dir(cfg, output_dir)
    try:
        eq = equilibrium_of(spec)
    except (OracleError, ValueError) as exc:
        return _fail(str(exc), EXIT_SOLVER)
    write_ndjson(out / "equilibrium.ndjson",
                 snapshot_records(spec.final_time, eq.c_eq, eq.phi_eq,
                                  [s.name for s in spec.species]))
    write_summary(out / "summary.yaml", {
        "command": "equilibrium",
        "newton_residual": eq.newton_residual,
        "newton_iterations": eq.iterations,
        "max_face_flux": max_flux_at(spec.with_eta(0.0), eq.c_eq, eq.phi_eq),
        "masses": spec.grid.cell_volume * np.sum(eq.c_eq, axis=1),
    })
    return EXIT_OK


def default_fixture_dir() -> Path:
    return Path(str(resources.files("nppsim") / "fixtures"))


def _golden_fields(records):
    return {r["species_or_phi"]: np.asarray(r["values"], dtype=float) for r in records}


def cmd_verify(fixture_dir=None) -> int:
    """Run the verification table against a fixture directory."""
    root = Path(fixture_dir) if fixture_dir else default_fixture_dir()
    eq_cfg = root / "equilibrium.yaml"
    golden = root / "golden_equilibrium.ndjson"
    oracle_cfgs = sorted(root.glob("oracle_*.yaml"))
    cert_cfgs = sorted(root.glob("certificate_*.yaml"))
    if not root.is_dir():
        return _fail(f"fixture directory {root} not found", EXIT_CONFIG)
    missing = [p.name for p in (eq_cfg, golden) if not p.exists()]
    if not oracle_cfgs:
        missing.append("oracle_*.yaml")
    if not cert_cfgs:
        missing.append("certificate_*.yaml")
    if missing:
        return _fail(f"missing fixtures in {root}: {', '.join(missing)}", EXIT_CONFIG)

    loaded = {}
    try:
        for p in [eq_cfg, *oracle_cfgs, *cert_cfgs]:
            loaded[p] = _load(p)
    except ConfigError as exc:
        return _fail(f"invalid fixture config: {exc}", EXIT_CONFIG)

    table = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except (SolverError, ValueError, KeyError) as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        table.append((name, ok, detail))

    def mms():
        r = poisson_mms()
        return 1.8 <= r["order"] <= 2.2 and all(1.8 <= o <= 2.2 for o in r["orders"]), \
            f"orders {', '.join(f'{o:.3f}' for o in r['orders'])}"

    check("poisson-mms", mms)

    for p in oracle_cfgs:
        cfg, spec, _ = loaded[p]

        def oracle(spec=spec, cfg=cfg):
            r = oracle_step_difference(spec, float(cfg.time.dt), tol=1e-11)
            worst = max(r["c_diff"], r["phi_diff"])
            return worst <= 1e-8, f"max diff {worst:.2e}"

        check(f"oracle:{p.stem}", oracle)

    cfg, spec, settings = loaded[eq_cfg]
    state = {}

    def golden_match():
        recs = _golden_fields(read_ndjson(golden))
        eq = equilibrium_of(spec)
        state["eq"] = eq
        worst = 0.0
        for i, s in enumerate(spec.species):
            worst = max(worst, float(spec.grid.cell_volume * np.sum(np.abs(recs[s.name] - eq.c_eq[i]))))
        worst = max(worst, float(spec.grid.cell_volume * np.sum(np.abs(recs["phi"] - eq.phi_eq))))
        return worst <= 1e-9, f"L1 vs golden {worst:.2e}"

    check("equilibrium:golden", golden_match)

    def long_time():
        recs = _golden_fields(read_ndjson(golden))
        c_ref = np.array([recs[s.name] for s in spec.species])
        r = long_time_match(spec, float(cfg.time.dt), c_ref, settings)
        flux = max_flux_at(spec, c_ref, recs["phi"])
        worst = max(r["l1_per_species"])
        return worst <= 1e-6 and flux <= 1e-11, f"L1 {worst:.2e}, flux at golden {flux:.2e}"

    check("equilibrium:long-time", long_time)

    for p in cert_cfgs:
        ccfg, cspec, csettings = loaded[p]

        def certificates(cfg=ccfg, spec=cspec, settings=csettings):
            c = cfg.certificates
            res = simulate(spec, float(cfg.time.dt), settings, entropy=bool(c.entropy),
                           slack=c.slack, sup_bound=c.sup_bound, mass_control=bool(c.mass_control))
            if not res.completed:
                return False, failure_message(res)
            bad = [k for k, v in res.certificates.items() if not v["holds"]]
            return not bad, ("all hold: " + ", ".join(res.certificates)) if not bad \
                else f"failed: {', '.join(bad)}"

        check(f"certificates:{p.stem}", certificates)

    width = max(len(n) for n, _, _ in table)
    for name, ok, detail in table:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    return EXIT_OK if all(ok for _, ok, _ in table) else EXIT_CERTIFICATE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nppsim", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="only print errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one configuration")
    p.add_argument("config")
    p.add_argument("--output-dir", default=None)

    p = sub.add_parser("sweep", help="vanishing-regularization sweep")
    p.add_argument("config")
    p.add_argument("--output-dir", default=None)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("verify", help="run the verification table")
    p.add_argument("dir", nargs="?", default=None)

    p = sub.add_parser("equilibrium", help="Poisson-Boltzmann steady state")
    p.add_argument("config")
    p.add_argument("--output-dir", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.config, args.output_dir)
    if args.command == "sweep":
        if args.jobs < 1:
            return _fail("--jobs must be >= 1", EXIT_CONFIG)
        return cmd_sweep(args.config, args.output_dir, args.jobs)
    if args.command == "verify":
        return cmd_verify(args.dir)
    return cmd_equilibrium(args.config, args.output_dir)


if __name__ == "__main__":
    sys.exit(main())
