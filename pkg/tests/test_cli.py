from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from qrbsde.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, main

SCEN = Path(__file__).resolve().parents[1] / "scenarios"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def test_zero_scenario_solves_to_zero(capsys):
    code, rep, err = run(capsys, "solve", "--scenario", SCEN / "zero.json")
    assert code == EXIT_OK and "solve: pass" in err
    assert rep["schema"] == "qrbsde-report/1" and rep["status"] == "pass"
    assert rep["result"]["y0"] == 0.0
    assert all(v == 0.0 for v in rep["result"]["y"])


def test_oracle_depth_two(capsys):
    code, rep, _ = run(capsys, "oracle", "--scenario", SCEN / "depth2.json")
    res = rep["result"]
    assert code == EXIT_OK
    assert res["y0_recursion"] == pytest.approx(0.6) and res["y0_enumeration"] == pytest.approx(0.6)
    assert res["dk"] == pytest.approx([0.0, 0.1, 0.1])
    assert res["max_abs_diff"] <= 1e-12


def test_unordered_compare_is_input_error(capsys):
    code, rep, err = run(capsys, "compare", "--scenario", SCEN / "unordered_a.json",
                         "--scenario-prime", SCEN / "unordered_b.json")
    assert code == EXIT_INPUT and rep is None
    assert "ordering violation" in err


@pytest.mark.parametrize("argv", [
    ("compare", "--scenario", SCEN / "quadratic.json", "--scenario-prime", SCEN / "quadratic_lower.json"),
    ("compare-k", "--scenario", SCEN / "quadratic.json", "--scenario-prime", SCEN / "quadratic_lower.json"),
    ("perturb", "--scenario", SCEN / "quadratic.json"),
    ("stability", "--scenario", SCEN / "quadratic.json"),
    ("bounds", "--scenario", SCEN / "monotone.json"),
    ("validate", "--scenario", SCEN / "monotone.json"),
    ("solve", "--scenario", SCEN / "monotone.json"),
    ("compare", "--scenario", SCEN / "quadratic.json", "--scenario-prime", SCEN / "quadratic_lower.json",
     "--parallel", "2"),
], ids=lambda a: " ".join(str(x) for x in a[:1]) if isinstance(a, tuple) else str(a))
def test_subcommands_pass(capsys, argv):
    code, rep, _ = run(capsys, *argv)
    assert code == EXIT_OK and rep["status"] == "pass"
    assert rep["command"] == argv[0]


def test_missing_inputs(capsys, tmp_path):
    code, _, err = run(capsys, "solve", "--scenario", tmp_path / "nope.json")
    assert code == EXIT_INPUT and "cannot read" in err
    code, _, _ = run(capsys, "compare", "--scenario", SCEN / "quadratic.json")
    assert code == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, _, err = run(capsys, "solve", "--scenario", bad)
    assert code == EXIT_INPUT and "line 1" in err


def test_gate_refusal_and_iteration_budget(capsys, tmp_path):
    sc = json.loads((SCEN / "quadratic.json").read_text())
    sc["options"] = {"solver": "picard"}
    sc["terminal"] = {"constant": 0.5}
    sc["obstacle"] = {"constant": -1.0}
    p = tmp_path / "big.json"
    p.write_text(json.dumps(sc))
    code, _, err = run(capsys, "solve", "--scenario", p)
    assert code == EXIT_INPUT and "epsilon0" in err
    code, _, err = run(capsys, "solve", "--scenario", p, "--force-gate", "--max-iter", "1", "--tol", "1e-15")
    assert code == EXIT_FAIL


def test_reports_are_byte_identical(capsys, tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"r{i}.json"
        assert main(["solve", "--scenario", str(SCEN / "quadratic.json"), "--out", str(path),
                     "--csv", str(tmp_path / f"t{i}.csv")]) == EXIT_OK
        outs.append((path.read_bytes(), (tmp_path / f"t{i}.csv").read_bytes()))
    capsys.readouterr()
    assert outs[0] == outs[1]
    header = outs[0][1].decode().splitlines()[0]
    assert header.startswith("node,path,t,y")


def test_stamp_adds_metadata(capsys):
    _, rep, _ = run(capsys, "solve", "--scenario", SCEN / "zero.json", "--stamp")
    assert rep["metadata"]["created_unix"] > 0 and rep["metadata"]["version"]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "qrbsde", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip()


def test_schema_files_shipped():
    from importlib import resources

    root = resources.files("qrbsde") / "schemas"
    ids = {json.loads((root / n).read_text())["$id"] for n in ("scenario.schema.json", "report.schema.json")}
    assert ids == {"qrbsde-scenario/1", "qrbsde-report/1"}
