import json
import subprocess

import pytest

from entroflux import ConfigurationError
from entroflux.cli import main
from entroflux.config import parse_config, validate


def base(**over):
    cfg = {
        "schema": "entroflux/1", "job": "simulate",
        "model": {"name": "maxwell_stefan"},
        "grid": {"M": 16}, "time": {"T": 0.02, "tau": 1e-2},
        "ic": {"kind": "constant", "params": {"value": [0.2, 0.3]}},
    }
    cfg.update(over)
    return cfg


def test_minimal_config_fills_defaults(write_config):
    cfg = parse_config(write_config(base()))
    assert cfg.job == "simulate" and cfg.L == 1.0 and cfg.seed == 0
    assert cfg.snapshot_stride == 1 and cfg.solver == {} and len(cfg.sha256) == 64
    assert cfg.build_model().params == {"d0": 3.0, "d1": 2.0, "d2": 1.0}


def test_ic_outside_simplex_rejected(write_config, tmp_path, capsys):
    p = write_config(base(ic={"kind": "constant", "params": {"value": [0.6, 0.6]}}))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert "must stay below 1" in capsys.readouterr().err


def test_all_errors_reported(write_config):
    bad = base(time={"T": 1.0, "tau": 0.0}, grid={"M": 1, "extra": 3},
               model={"name": "maxwell_stefan", "params": {"d0": -1}})
    with pytest.raises(ConfigurationError) as info:
        parse_config(write_config(bad))
    errs = info.value.errors
    assert any(e.startswith("time/tau") for e in errs)
    assert any(e.startswith("grid") and "extra" in e for e in errs)
    assert any(e.startswith("grid/M") for e in errs)
    assert any(e.startswith("model/params") for e in errs)


def test_unknown_model_parameter(write_config):
    errs = validate(base(model={"name": "tumor", "params": {"d0": 1}}))
    assert errs and "unknown keys" in errs[0]


def test_job_mismatch(write_config):
    with pytest.raises(ConfigurationError):
        parse_config(write_config(base()), job="certify")


def test_missing_and_malformed_files(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "none.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad)]) == 1
    assert "malformed JSON" in capsys.readouterr().err


def test_zero_time_writes_initial_snapshot(write_config, tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(write_config(base(time={"T": 0, "tau": 0.1}))),
                 "--out", str(out)]) == 0
    lines = (out / "snapshots.csv").read_text().splitlines()
    assert lines[0] == "t,x,u1,u2" and len(lines) == 1 + 16
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and man["summary"]["steps"] == 0


def test_simulate_outputs_and_manifest(write_config, tmp_path):
    out = tmp_path / "o"
    cfg = base(ic={"kind": "step", "params": {"left": [0.5, 0.2], "right": [0.1, 0.2]}})
    assert main(["simulate", "--config", str(write_config(cfg)), "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert set(man["files"]) == {"snapshots.csv", "steps.csv", "diagnostics.csv",
                                 "manifest.json"}
    assert man["summary"]["entropy_increase_violations"] == 0
    assert man["summary"]["steps"] == 2
    assert len((out / "steps.csv").read_text().splitlines()) == 3


def test_numerical_failure_exit_code(write_config, tmp_path):
    out = tmp_path / "o"
    cfg = base(ic={"kind": "step", "params": {"left": [0.5, 0.2], "right": [0.1, 0.2]}},
               solver={"newton_max_iter": 1, "newton_tol": 1e-300, "max_fallbacks": 0})
    assert main(["simulate", "--config", str(write_config(cfg)), "--out", str(out)]) == 2
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "failed" and "failure" in man["summary"]
    assert (out / "snapshots.csv").exists()


def test_certify_job(write_config, tmp_path):
    out = tmp_path / "o"
    cfg = {"schema": "entroflux/1", "job": "certify",
           "model": {"name": "maxwell_stefan", "params": {"d0": 3, "d1": 2, "d2": 1}},
           "certify": {"n_samples": 2000}}
    assert main(["certify", "--config", str(write_config(cfg)), "--out", str(out)]) == 0
    rep = json.loads((out / "certify.json").read_text())
    assert rep["H2"]["verdict"] == "pass" and rep["H2prime"]["verdict"] == "pass"


def test_feasibility_job(write_config, tmp_path):
    out = tmp_path / "o"
    cfg = {"schema": "entroflux/1", "job": "feasibility_scan",
           "feasibility": {"params": [[1, 2, 0, 1, 0], [1, 1, 1, 1, 5]], "random_count": 3}}
    assert main(["feasibility_scan", "--config", str(write_config(cfg)), "--out", str(out)]) == 0
    lines = (out / "feasibility.csv").read_text().splitlines()
    assert len(lines) == 1 + 5
    man = json.loads((out / "manifest.json").read_text())
    assert man["summary"]["oracle_disagreements"] == 0


def test_lattice_compare_job(write_config, tmp_path):
    out = tmp_path / "o"
    cfg = {"schema": "entroflux/1", "job": "lattice_compare",
           "lattice": {"s": 1.0, "beta": 1.0, "hs": [0.125, 0.0625], "T": 0.01,
                       "M_ref": 64, "tau_ref": 1e-3}}
    assert main(["lattice_compare", "--config", str(write_config(cfg)), "--out", str(out)]) == 0
    errs = (out / "limit_errors.csv").read_text().splitlines()
    assert errs[0] == "h,l2_error" and len(errs) == 3
    assert "source" in (out / "lattice.csv").read_text().splitlines()[0]


def test_seed_changes_perturbation(write_config, tmp_path):
    cfg = base(ic={"kind": "perturbed_constant", "params": {"value": [0.3, 0.3],
                                                            "amplitude": 0.05}})
    p = write_config(cfg)
    texts = []
    for seed in ("1", "2"):
        out = tmp_path / seed
        assert main(["simulate", "--config", str(p), "--out", str(out), "--seed", seed]) == 0
        texts.append((out / "snapshots.csv").read_text())
    assert texts[0] != texts[1]


def test_console_entry_point(write_config, tmp_path, cli_cmd):
    proc = subprocess.run(cli_cmd + ["--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--config" in proc.stdout
    p = write_config(base(time={"T": 0.01, "tau": -1}))
    proc = subprocess.run(cli_cmd + ["simulate", "--config", str(p), "--out",
                                     str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 1 and "tau" in proc.stderr


def test_shipped_configs_validate():
    from pathlib import Path

    paths = sorted((Path(__file__).parent.parent / "configs").glob("*.json"))
    assert len(paths) >= 4
    for p in paths:
        parse_config(p)
