import json
import shutil

import numpy as np
import pytest
import yaml

from conftest import CONFIG_DIR, FIXTURE_DIR
from nppsim.cli import main
from nppsim.config import (ConfigError, RunConfig, build_problem, dump_config, load_config,
                           solver_settings)
from nppsim.model import validate
from nppsim.outputs import fmt, read_csv, read_ndjson, write_csv

SHIPPED = sorted(CONFIG_DIR.glob("*.yaml"))


def _write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def _base():
    return yaml.safe_load((CONFIG_DIR / "coupled_1d.yaml").read_text())


@pytest.mark.parametrize("path", SHIPPED, ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path):
    cfg = load_config(path)
    assert validate(build_problem(cfg)) == []
    solver_settings(cfg)


@pytest.mark.parametrize("path", SHIPPED, ids=lambda p: p.stem)
def test_round_trip(path):
    cfg = load_config(path)
    again = RunConfig.from_dict(yaml.safe_load(dump_config(cfg)))
    assert again == cfg
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("where", ["top", "grid", "species", "solver", "initial", "reactions"])
def test_unknown_keys_rejected(tmp_path, where):
    d = _base()
    if where == "top":
        d["colour"] = 1
    elif where == "grid":
        d["grid"]["cell"] = [3]
    elif where == "species":
        d["species"][0]["mass"] = 1
    elif where == "solver":
        d["solver"]["tolerance"] = 1e-9
    elif where == "initial":
        d["species"][0]["initial"]["sigma"] = 1.0
    else:
        d["reactions"] = {"kind": "none", "rate": 2.0}
    with pytest.raises(ConfigError):
        build_problem(load_config(_write(tmp_path, d)))


def test_malformed_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("grid: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_random_initial_is_seeded(tmp_path):
    d = _base()
    d["species"][0]["initial"] = {"kind": "random", "low": 0.5, "high": 1.5}
    d["seed"] = 7
    a = build_problem(load_config(_write(tmp_path, d))).initial_concentrations()
    b = build_problem(load_config(_write(tmp_path, d))).initial_concentrations()
    d["seed"] = 8
    c = build_problem(load_config(_write(tmp_path, d))).initial_concentrations()
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_fmt_round_trips():
    for v in (0.1, 1 / 3, 1e-300, -2.5e17, np.float64(np.pi)):
        assert float(fmt(v)) == float(v)
    assert fmt(3) == "3" and fmt(True) == "1"


def test_csv_round_trip(tmp_path):
    rows = [[0.0, 1 / 3, 2.0], [0.1, np.e, -1e-20]]
    write_csv(tmp_path / "a.csv", ["t", "x", "y"], rows)
    text = (tmp_path / "a.csv").read_text().splitlines()
    assert text[0].startswith("# nppsim-csv v")
    header, back = read_csv(tmp_path / "a.csv")
    assert header == ["t", "x", "y"] and back == rows


def test_ndjson_reader_validates(tmp_path):
    p = tmp_path / "s.ndjson"
    p.write_text(json.dumps({"time": 0, "values": []}) + "\n")
    with pytest.raises(ValueError):
        read_ndjson(p)


def test_cli_run_diffusion(tmp_path):
    assert main(["--quiet", "run", str(CONFIG_DIR / "diffusion_1d.yaml"),
                 "--output-dir", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "diagnostics.csv")
    mass = np.array([r[header.index("mass_1")] for r in rows])
    assert np.max(np.abs(mass - mass[0])) <= 1e-12 * mass[0]
    snaps = read_ndjson(tmp_path / "snapshots.ndjson")
    assert sorted({s["time"] for s in snaps}) == [0.0, 0.25, 0.5]
    assert {s["species_or_phi"] for s in snaps} == {"solute", "phi"}
    summary = yaml.safe_load((tmp_path / "summary.yaml").read_text())
    assert summary["completed"] and all(c["holds"] for c in summary["certificates"].values())


def test_cli_run_coupled_is_deterministic_and_decays(tmp_path):
    cfg = str(CONFIG_DIR / "coupled_1d.yaml")
    assert main(["--quiet", "run", cfg, "--output-dir", str(tmp_path / "a")]) == 0
    assert main(["--quiet", "run", cfg, "--output-dir", str(tmp_path / "b")]) == 0
    for name in ("diagnostics.csv", "snapshots.ndjson"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header, rows = read_csv(tmp_path / "a" / "diagnostics.csv")
    V = np.array([r[1] for r in rows])
    assert np.all(np.diff(V) <= 1e-8 * V[0])


def test_cli_tau_zero_is_config_error(tmp_path, capsys):
    d = _base()
    d["boundary"]["tau"] = 0.0
    assert main(["--quiet", "run", str(_write(tmp_path, d))]) == 2
    assert "tau identically zero" in capsys.readouterr().err


def test_cli_solver_failure_exit_3(tmp_path):
    d = _base()
    d["solver"] = {"max_iter": 2, "tol": 1e-14}
    d["output"] = {"directory": str(tmp_path / "out")}
    assert main(["--quiet", "run", str(_write(tmp_path, d))]) == 3
    summary = yaml.safe_load((tmp_path / "out" / "summary.yaml").read_text())
    assert not summary["completed"] and summary["error"]


def test_cli_certificate_failure_exit_4(tmp_path):
    d = _base()
    d["certificates"] = {"sup_bound": 0.5}
    assert main(["--quiet", "run", str(_write(tmp_path, d)), "--output-dir", str(tmp_path)]) == 4


def test_cli_sweep_codes(tmp_path):
    d = _base()
    d["time"] = {"final_time": 0.05, "dt": 0.01}
    d["sweep"] = {"eta_schedule": [0.01, 0.1]}
    assert main(["--quiet", "sweep", str(_write(tmp_path, d))]) == 2
    d["sweep"] = {"eta_schedule": [0.1]}
    out = tmp_path / "one"
    assert main(["--quiet", "sweep", str(_write(tmp_path, d)), "--output-dir", str(out)]) == 0
    header, rows = read_csv(out / "sweep.csv")
    assert header[:5] == ["pair", "eta_a", "eta_b", "l1", "sqrt_l2"] and rows == []
    d["sweep"] = {"eta_schedule": [0.1, 0.01, 0.001]}
    out = tmp_path / "three"
    assert main(["--quiet", "sweep", str(_write(tmp_path, d)), "--output-dir", str(out),
                 "--jobs", "2"]) == 0
    _, rows = read_csv(out / "sweep.csv")
    assert len(rows) == 2 and rows[1][3] < rows[0][3]


def test_cli_equilibrium(tmp_path):
    assert main(["--quiet", "equilibrium", str(CONFIG_DIR / "equilibrium_1d.yaml"),
                 "--output-dir", str(tmp_path)]) == 0
    recs = read_ndjson(tmp_path / "equilibrium.ndjson")
    gold = read_ndjson(FIXTURE_DIR / "golden_equilibrium.ndjson")
    assert [r["species_or_phi"] for r in recs] == ["cation", "anion", "phi"]
    for r, g in zip(recs, gold):
        assert np.max(np.abs(np.array(r["values"]) - g["values"])) < 1e-12


def test_cli_verify_clean():
    assert main(["--quiet", "verify"]) == 0


def test_cli_verify_missing_and_corrupted(tmp_path):
    assert main(["--quiet", "verify", str(tmp_path / "nowhere")]) == 2
    fx = tmp_path / "fx"
    shutil.copytree(FIXTURE_DIR, fx)
    (fx / "golden_equilibrium.ndjson").unlink()
    assert main(["--quiet", "verify", str(fx)]) == 2
    shutil.copy(FIXTURE_DIR / "golden_equilibrium.ndjson", fx)
    recs = read_ndjson(fx / "golden_equilibrium.ndjson")
    recs[0]["values"][10] *= 1.01
    (fx / "golden_equilibrium.ndjson").write_text("".join(json.dumps(r) + "\n" for r in recs))
    assert main(["--quiet", "verify", str(fx)]) == 4


def test_cli_rejects_bad_jobs(tmp_path):
    assert main(["--quiet", "sweep", str(CONFIG_DIR / "sweep_1d.yaml"), "--jobs", "0"]) == 2
