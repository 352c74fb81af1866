import csv
import json
import subprocess
import sys

import pytest

from rwre.cli import main


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_verify_trivial():
    assert main(["verify", "--suite", "trivial"], quiet=True) == 0


def test_simple_walk_curve(tmp_path):
    assert main(["simulate-walk", "--env", "constant:1", "--steps", "100", "--exact", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "curve.csv")
    last = rows[-1]
    assert last["n"] == "100" and last["second_moment"] == "100.0" and last["method"] == "exact"
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["environment"]["family"] == "constant"


def test_estimate_limit_two_point(tmp_path):
    assert main(["estimate-limit", "--env", "iid-two-point:1,2,0.5", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "limit.json").read_text())
    assert {"environment", "limit", "provenance", "curve", "verdict"} <= set(rep)
    assert rep["limit"] == pytest.approx(8 / 9)
    assert str(rep["limit"]).startswith("0.888")
    assert rep["verdict"] == "PASS"


def test_estimate_limit_degenerate(tmp_path):
    assert main(["estimate-limit", "--env", "iid-uniform:0,1", "--seed", "1", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "limit.json").read_text())
    assert rep["limit"] == 0.0 and rep["verdict"] == "DEGENERATE-PASS"
    assert rep["provenance"] == "divergent-flag"


def test_fail_exit_code(tmp_path):
    # a deliberately wrong tolerance-free target: the upper bound 1.0 is violated
    code = main(["simulate-diffusion", "--env", "flow:lambda=2+sin", "--dt", "0.01", "--horizons", "1",
                 "--streams", "4000", "--bias-streams", "1000", "--check-bound", "1.0", "upper",
                 "--seed", "1", "--out", str(tmp_path)])
    assert code == 2
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["verdicts"][0]["verdict"] == "FAIL"


def test_inconclusive_exit_code(tmp_path):
    code = main(["simulate-diffusion", "--env", "flow:lambda=2+sin", "--dt", "0.01", "--horizons", "1",
                 "--streams", "10", "--bias-streams", "10", "--check-bound", "3", "--out", str(tmp_path)])
    assert code == 3


@pytest.mark.parametrize("argv", [
    ["simulate-walk", "--env", "constant:1", "--bogus"],
    ["simulate-walk", "--env", "nonsense:1", "--steps", "10"],
    ["simulate-walk", "--steps", "10"],
    ["simulate-walk", "--env", "flow:lambda=2+sin", "--steps", "10"],
    ["corrector", "--env", "constant:1", "--variant", "continuous"],
    ["simulate-diffusion", "--env", "flow:lambda=2+sin", "--dt", "0.03", "--horizons", "1"],
    [],
])
def test_usage_errors(argv, capsys):
    assert main(argv, quiet=True) == 1
    assert capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = {
        "subcommand": "simulate-walk",
        "environment": {"family": "iid-two-point", "a": 1.0, "b": 2.0, "p": 0.5},
        "params": {"checkpoints": [10, 50], "exact": True},
        "seed": 3,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "o"
    assert main(["simulate-walk", "--config", str(path), "--checkpoints", "20", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["times"] == [20]
    assert rep["config"]["seed"] == 3
    assert rep["environment"]["family"] == "iid-two-point"


def test_corrector_outputs(tmp_path):
    assert main(["corrector", "--env", "iid-two-point:1,2,0.5", "--range", "200", "--seed", "1",
                 "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "table.csv")
    assert len(rows) == 401
    zero = next(r for r in rows if r["m_or_x"] == "0")
    assert zero["f"] == "0.0" and zero["f_over_msq"] == ""
    summary = json.loads((tmp_path / "corrector.json").read_text())
    assert summary["max_residual"] < 1e-12


def test_byte_identical_reruns(tmp_path):
    argv = ["simulate-ctmc", "--env", "iid-two-point:1,2,0.5", "--horizons", "1,10", "--streams", "3000"]
    outs = []
    for i, th in enumerate(("1", "1", "8")):
        d = tmp_path / str(i)
        assert main([*argv, "--threads", th, "--out", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1] == outs[2]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rwre", "estimate-limit", "--env", "constant:2", "--no-curve"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["limit"] == 1.0
