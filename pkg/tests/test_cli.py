import json
import subprocess
import sys

import pytest

from cosim_swap.cli import main
from cosim_swap.scenarios import WATERTANK, WATERTANK_SWAP


@pytest.fixture
def wt(tmp_path):
    p = tmp_path / "mm.json"
    p.write_text(json.dumps(WATERTANK))
    return p


def test_run_writes_400_rows(wt, tmp_path):
    out = tmp_path / "run.csv"
    code = main(["run", "--config", str(wt), "--start", "0", "--end", "40", "--step", "0.1", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "time,{x1}.controller.valve,{x2}.tank.level"
    assert len(lines) == 401


def test_run_via_module_entry_point(wt, tmp_path):
    out = tmp_path / "run.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "cosim_swap", "run", "--config", str(wt), "--end", "1", "--step", "0.1",
         "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert len(out.read_text().splitlines()) == 11


def test_validate_unknown_model(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"fmus": {"{x1}": "nosuch.fmu"}, "parameters": {"{x1}.a.b": 1}}')
    assert main(["validate", "--config", str(p)]) == 1
    assert "unknown model nosuch" in capsys.readouterr().err


def test_validate_ok_with_swap_spec(wt, tmp_path, capsys):
    spec = tmp_path / "swap.json"
    spec.write_text(json.dumps(WATERTANK_SWAP))
    assert main(["validate", "--config", str(wt), "--swap-spec", str(spec)]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_reports_loop(tmp_path, capsys):
    p = tmp_path / "loop.json"
    p.write_text(json.dumps({
        "fmus": {"{a}": "passthrough", "{b}": "passthrough"},
        "connections": {"{a}.a.y": ["{b}.b.u"], "{b}.b.y": ["{a}.a.u"]},
    }))
    assert main(["validate", "--config", str(p)]) == 1
    assert "algebraic loop: a.y -> b.u -> b.y -> a.u" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == 2
    assert main(["run", "--config", "x.json"]) == 2
    assert main([]) == 2


def test_missing_config_file(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 3
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--end", "1", "--step", "0.1",
                 "--out", str(tmp_path / "o.csv")]) == 3


def test_missing_transfer_dir(wt, tmp_path):
    code = main(["run", "--config", str(wt), "--end", "1", "--step", "0.1", "--out", str(tmp_path / "o.csv"),
                 "--transfer-dir", str(tmp_path / "inbox")])
    assert code == 3


def test_bad_step_is_usage_error(wt, tmp_path):
    assert main(["run", "--config", str(wt), "--end", "1", "--step", "0", "--out", str(tmp_path / "o.csv")]) == 2


def test_schedule_file(wt, tmp_path):
    (tmp_path / "swap.json").write_text(json.dumps(WATERTANK_SWAP))
    sched = tmp_path / "schedule.json"
    sched.write_text(json.dumps([{"time": 22.0, "spec": "swap.json"}]))
    out = tmp_path / "run.csv"
    code = main(["run", "--config", str(wt), "--end", "40", "--step", "0.1", "--out", str(out),
                 "--schedule", str(sched)])
    assert code == 0
    head = out.read_text().splitlines()[0].split(",")
    assert "{x4}.leak_controller.valve" in head and "swapCondition[controller]" in head


def test_faults_file(wt, tmp_path):
    rules = tmp_path / "faults.json"
    rules.write_text(json.dumps([{
        "instance": "tank", "variable": "valvecontrol", "direction": "input",
        "trigger": "(tank.time >= 12 && tank.level >= 1.6)", "transform": "alternate01",
    }]))
    out = tmp_path / "run.csv"
    assert main(["run", "--config", str(wt), "--end", "40", "--step", "0.1", "--out", str(out),
                 "--faults", str(rules)]) == 0
    rows = [r.split(",") for r in out.read_text().splitlines()[1:]]
    assert max(float(r[2]) for r in rows[200:]) < 2.0


def test_scenario_command(tmp_path):
    out = tmp_path / "wt.csv"
    assert main(["scenario", "watertank-swap", "--transfer-at", "22.0", "--out", str(out), "-v"]) == 0
    assert len(out.read_text().splitlines()) == 401
