import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from bsdelab import DivergedError, load_config, run_scenario
from bsdelab import harness
from bsdelab.cli import main
from bsdelab.config import parse_config

DEMOS = Path(__file__).resolve().parents[1] / "demos" / "scenarios"


def _cfg(**over):
    base = yaml.safe_load((DEMOS / "discounted_put.yaml").read_text())
    base["run"] = {**base["run"], "n_paths": 3000}
    base.update(over)
    return base


def _write(tmp_path, data, name="s.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(Path(d).iterdir()) if p.name != "timing.json"}


def test_solve_martingale_report(tmp_path):
    cfg = load_config(DEMOS / "martingale.yaml")
    rep = run_scenario(cfg, "solve", tmp_path, seed=0)
    assert rep.exit_code == 0
    assert rep.oracles["martingale"]["pass"] and rep.oracles["tower_property"]["pass"]
    out = rep.out_dir
    assert out.name == f"{rep.digest}-seed0"
    header = (out / "Y.csv").read_text().splitlines()[0].split(",")
    assert header[0] == "path" and len(header) == 1 + 51
    assert (out / "U_mark1.csv").exists()
    saved = json.loads((out / "report.json").read_text())
    assert saved["digest"] == rep.digest and saved["checks"]["terminal_consistency"]


def test_reflect_records_tree_oracle(tmp_path):
    rep = run_scenario(load_config(DEMOS / "american_put.yaml"), "reflect", tmp_path)
    tree = rep.oracles["binomial_tree"]
    assert tree["pass"] and tree["relative_error"] <= 0.02
    assert all(rep.checks.values())


@pytest.mark.parametrize("rule", harness.RULES)
def test_stop_rules(tmp_path, rule):
    rep = run_scenario(parse_config(_cfg()), "stop", tmp_path, rule=rule, epsilon=1.0)
    assert rep.checks["stopping_order"] and rep.checks["no_excess_over_value"]
    if rule == "d_eps":
        assert "sandwich" in json.loads((rep.out_dir / "gap_report.json").read_text())
    lines = (rep.out_dir / "stops.csv").read_text().splitlines()
    assert lines[0] == "path,rule,sigma_index,stop_index,stop_time" and len(lines) == 3001


def test_robust_outputs(tmp_path):
    data = yaml.safe_load((DEMOS / "robust_put.yaml").read_text())
    data["run"]["n_paths"] = 3000
    rep = run_scenario(parse_config(data), "robust", tmp_path)
    assert rep.exit_code == 0 and rep.checks["weak_duality"] and rep.checks["saddle_certificate"]
    cert = json.loads((rep.out_dir / "certificate.json").read_text())
    assert cert["delta_bar"] == 0.05


def test_byte_determinism_and_distinct_dirs(tmp_path):
    cfg = parse_config(_cfg())
    a = run_scenario(cfg, "stop", tmp_path / "a", seed=4)
    b = run_scenario(cfg, "stop", tmp_path / "b", seed=4)
    assert _files(a.out_dir) == _files(b.out_dir)
    c = run_scenario(cfg, "stop", tmp_path / "a", seed=4, rule="d_eps")
    d = run_scenario(cfg, "reflect", tmp_path / "a", seed=4)
    assert len({a.out_dir, c.out_dir, d.out_dir}) == 3
    e = run_scenario(cfg, "stop", tmp_path / "a", seed=5)
    assert e.out_dir.name.startswith(a.digest) and _files(e.out_dir)["stops.csv"] != _files(a.out_dir)["stops.csv"]


def test_failure_leaves_no_directory(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise DivergedError("diverged in test", index=3)
    monkeypatch.setattr(harness, "_solve", boom)
    with pytest.raises(DivergedError):
        run_scenario(load_config(DEMOS / "martingale.yaml"), "solve", tmp_path)
    assert list(tmp_path.iterdir()) == []


def test_cli_exit_codes(tmp_path, capsys):
    bad = _cfg(delay={"lags": [0.2, 0.4], "weights": [0.5, 0.6]})
    assert main(["solve", "--config", str(_write(tmp_path, bad)), "--out", str(tmp_path / "o")]) == 2
    assert "DelayMeasure" in capsys.readouterr().err

    slow = _cfg(generator={"kind": "linear-in-y", "coef": 3.0}, delay={"lags": [0.4], "weights": [1.0]},
                picard={"max_iters": 3}, obstacle=None, grid={"horizon": 2.0, "steps": 50})
    assert main(["solve", "--config", str(_write(tmp_path, slow, "slow.yaml")), "--out", str(tmp_path / "o")]) == 3

    ok = _write(tmp_path, _cfg(), "ok.yaml")
    assert main(["stop", "--config", str(ok), "--out", str(tmp_path / "o"), "--sigma", "0.2", "--rule", "tau_bar"]) == 0
    assert main(["stop", "--config", str(ok), "--out", str(tmp_path / "o"), "--sigma", "0.013"]) == 2


def test_invariant_failure_exit_code(tmp_path, monkeypatch):
    real = harness._structural

    def broken(report, sol, prefix=""):
        real(report, sol, prefix)
        report.checks[prefix + "domination"] = False
    monkeypatch.setattr(harness, "_structural", broken)
    rep = run_scenario(parse_config(_cfg()), "reflect", tmp_path)
    assert rep.exit_code == 2


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "bsdelab.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in harness.SUBCOMMANDS:
        assert sub in res.stdout


def test_csv_floats_round_trip(tmp_path):
    x = np.array([1 / 3, 1e-300, -2.5e10])
    harness.write_csv(tmp_path / "x.csv", {"v": x})
    back = np.array([float(r) for r in (tmp_path / "x.csv").read_text().splitlines()[1:]])
    assert np.array_equal(back, x)
