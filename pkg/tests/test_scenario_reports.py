from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from qrbsde.lattice import build_tree
from qrbsde.reports import REPORT_SCHEMA, dumps, envelope, node_table, to_jsonable, write_json
from qrbsde.scenario import ScenarioError, load_scenario, parse_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def _base(**over):
    obj = {"tree": {"depth": 2, "branching": 2, "dt": 0.5, "sigma": 1.0},
           "driver": {"f": "0.1*sq(z)"}, "terminal": {"constant": 0.0}}
    obj.update(over)
    return obj


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.name)
def test_shipped_scenarios_load(path):
    sc = load_scenario(path)
    assert sc.summary()["schema"] == "qrbsde-scenario/1"


def test_depth_two_scenario_contents():
    sc = load_scenario(SCENARIOS / "depth2.json")
    np.testing.assert_array_equal(sc.data.xi, [1.0, 0.0, 0.0, 1.0])
    np.testing.assert_array_equal(sc.data.obstacle, [0.6, 0.6, 0.6, 0, 0, 0, 0])
    assert sc.options.solver == "backward"


def test_expressions_and_coefficients():
    sc = parse_scenario(_base(
        driver={"f": "k*y", "coefficients": {"k": "0.5*t"}, "g": "0.1*t", "constants": {"lambda": 2.0}},
        terminal={"expr": "tanh(m) + T"}, obstacle={"expr": "-1 + 0*w", "terminal": -5.0}))
    m = sc.model
    np.testing.assert_allclose(sc.data.xi, np.tanh(m.m_value[m.leaves]) + 1.0)
    np.testing.assert_allclose(sc.data.driver.g, 0.1 * m.time)
    assert sc.data.obstacle[0] == -1.0 and np.all(sc.data.obstacle[m.leaves] == -5.0)


@pytest.mark.parametrize("obj,match", [
    ([], "JSON object"),
    (_base(schema="other/2"), "schema"),
    ({"driver": {"f": "0"}}, "tree"),
    (_base(tree={"depth": 2, "dt": -1.0}), "dt"),
    (_base(driver={}), "'f'"),
    (_base(driver={"f": "y + + z"}), "token 3"),
    (_base(driver={"f": "q*y"}), "unknown"),
    (_base(terminal={"values": [1.0, 2.0]}), "4 leaf values"),
    (_base(obstacle={"constant": 1.0}), "below obstacle"),
    (_base(terminal={"expr": "bogus"}), "unknown names"),
    (_base(options={"solver": "magic"}), "options.solver"),
    (_base(driver={"f": "0", "family": "x"}), "family"),
    (_base(driver={"f": "0", "constants": {"rho": {"kind": "cubic"}}}), "rho"),
])
def test_invalid_scenarios(obj, match):
    with pytest.raises(ScenarioError, match=match):
        parse_scenario(obj)


def test_json_error_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"tree":\n  {"depth": 2,,}}')
    with pytest.raises(ScenarioError, match="line 2, column"):
        load_scenario(p)
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "missing.json")


def test_to_jsonable():
    out = to_jsonable({"a": np.arange(2), "b": np.float64(np.inf), "c": (np.bool_(True), None),
                       1: float("nan")})
    assert out == {"a": [0, 1], "b": "inf", "c": [True, None], "1": "nan"}


def test_dumps_is_canonical(tmp_path):
    env = envelope("solve", "pass", 3, {"y": np.array([0.1, 0.2])}, budget=None)
    text = dumps(env)
    assert text.endswith("\n") and json.loads(text)["schema"] == REPORT_SCHEMA
    assert text == dumps(json.loads(text))
    assert "metadata" not in env
    path = tmp_path / "sub" / "r.json"
    write_json(path, env)
    assert path.read_text() == text
    assert list(path.parent.iterdir()) == [path]


def test_node_table():
    m = build_tree(1, 2, 1.0, 1.0)
    text = node_table(m, {"y": np.array([0.5, 1.0, 0.0]), "dk": np.array([0.25])})
    rows = text.strip().split("\n")
    assert rows[0] == "node,path,t,y,dk"
    assert rows[1].endswith(",0.5,0.25") and rows[2].endswith(",1.0,")
    assert len(rows) == 4
