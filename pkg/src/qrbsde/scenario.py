"""Scenario files: JSON description of a tree, driver, terminal value and obstacle.

Schema ``qrbsde-scenario/1``::

    {
      "schema": "qrbsde-scenario/1",
      "tree": {"depth": 3, "branching": 2, "dt": 0.25, "sigma": 1.0},
      "driver": {
        "f": "0.25*sq(z) + 0.5*y",
        "g": 0.0, "nu": 0.0,
        "coefficients": {"k": "0.1*tanh(m)"},
        "constants": {"lambda": 1.0, "lambda_qg": {"kind": "linear", "c": 1.0},
                      "rho": 0.5, "rho_prime": 0.5, "r": 1.0, "h": 1.0, "mu": null},
        "family": "lipschitz_y"
      },
      "terminal": {"expr": "tanh(m)"} | {"values": [...]} | {"constant": 0.0},
      "obstacle": {"constant": 0.2, "terminal": -1.0} | {"expr": "..."} | {"values": [...]},
      "options": {"solver": "full", "tol": 1e-10, "max_iter": 200, "force_gate": false,
                  "seed": 0, "n_split": null}
    }

Expressions for ``g``, ``nu``, coefficients, terminal and obstacle may use
``t``, ``m`` (reference martingale) and ``w`` (orthogonal coordinate);
``T`` is bound to the horizon.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import expr as _expr
from .driver import FAMILIES, Constants, DriverSpec, RBSDEData
from .errors import DriverError, DriverSyntaxError, ParameterError, RBSDEError
from .growth import Growth
from .lattice import TreeModel, build_tree

SCHEMA = "qrbsde-scenario/1"
SOLVERS = ("full", "picard", "backward")


class ScenarioError(ParameterError):
    """Invalid scenario file."""


@dataclass
class Options:
    solver: str = "full"
    tol: float = 1e-10
    max_iter: int = 200
    force_gate: bool = False
    seed: int = 0
    n_split: int | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Scenario:
    model: TreeModel
    data: RBSDEData
    options: Options
    raw: dict = field(repr=False)
    source: str | None = None
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        tree = {"depth": self.model.depth, "branching": self.model.branching,
                "dt": self.model.dt, "sigma": self.model.sigma}
        drv = self.raw.get("driver", {})
        return {"schema": SCHEMA, "tree": tree, "driver": drv.get("f"),
                "family": self.data.driver.family,
                "constants": self.data.driver.constants.to_dict()}


def _node_process(model: TreeModel, spec, what: str, coefficients=None) -> np.ndarray:
    """Number, expression string or explicit list of node values."""
    if spec is None:
        return np.zeros(model.n_nodes)
    if isinstance(spec, bool):
        raise ScenarioError(f"{what}: expected a number, expression or list")
    if isinstance(spec, (int, float)):
        return np.full(model.n_nodes, float(spec))
    if isinstance(spec, str):
        return _eval_expr(model, spec, what, coefficients)
    if isinstance(spec, list):
        arr = np.asarray(spec, dtype=float)
        if arr.shape == (model.n_internal,):
            return np.concatenate([arr, np.zeros(model.n_leaves)])
        if arr.shape != (model.n_nodes,):
            raise ScenarioError(f"{what}: expected {model.n_nodes} node values, got {arr.size}")
        return arr
    raise ScenarioError(f"{what}: expected a number, expression or list")


def _eval_expr(model: TreeModel, text: str, what: str, coefficients=None) -> np.ndarray:
    try:
        ast = _expr.parse_driver(text)
    except DriverSyntaxError as exc:
        raise ScenarioError(f"{what}: {exc}") from None
    env = {"t": model.time, "m": model.m_value, "w": model.w_value, "T": model.horizon}
    env.update(coefficients or {})
    unknown = _expr.variables(ast) - set(env)
    if unknown:
        raise ScenarioError(f"{what}: unknown names {sorted(unknown)}")
    try:
        val = _expr.evaluate(ast, env)
    except DriverError as exc:
        raise ScenarioError(f"{what}: {exc}") from None
    out = np.array(np.broadcast_to(np.asarray(val, dtype=float), (model.n_nodes,)))
    if not np.all(np.isfinite(out)):
        raise ScenarioError(f"{what}: expression is not finite at every node")
    return out


def _growth(spec, what: str, default) -> Growth:
    if spec is None:
        return default
    try:
        return Growth.parse(spec)
    except (ParameterError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{what}: {exc}") from None


def _leaf_values(model: TreeModel, spec: dict, what: str) -> np.ndarray:
    if not isinstance(spec, dict):
        raise ScenarioError(f"{what}: expected an object")
    if "values" in spec:
        arr = np.asarray(spec["values"], dtype=float)
        if arr.shape != (model.n_leaves,):
            raise ScenarioError(f"{what}: expected {model.n_leaves} leaf values, got {arr.size}")
        return arr
    if "constant" in spec:
        return np.full(model.n_leaves, float(spec["constant"]))
    if "expr" in spec:
        return _eval_expr(model, spec["expr"], what)[model.leaves]
    raise ScenarioError(f"{what}: needs 'values', 'constant' or 'expr'")


def _obstacle(model: TreeModel, spec: dict | None) -> np.ndarray:
    if spec is None:
        return np.full(model.n_nodes, -1e6)
    if not isinstance(spec, dict):
        raise ScenarioError("obstacle: expected an object")
    if "values" in spec:
        arr = _node_process(model, list(spec["values"]), "obstacle")
    elif "constant" in spec:
        arr = np.full(model.n_nodes, float(spec["constant"]))
    elif "expr" in spec:
        arr = _eval_expr(model, spec["expr"], "obstacle")
    else:
        raise ScenarioError("obstacle: needs 'values', 'constant' or 'expr'")
    if "terminal" in spec:
        arr[model.leaves] = float(spec["terminal"])
    return arr


def parse_scenario(obj: dict, source: str | None = None) -> Scenario:
    """Build and validate a scenario; every failure raises :class:`ScenarioError`."""
    if not isinstance(obj, dict):
        raise ScenarioError("scenario must be a JSON object")
    schema = obj.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ScenarioError(f"unsupported scenario schema {schema!r}")
    try:
        tree = obj["tree"]
        model = build_tree(int(tree["depth"]), int(tree.get("branching", 2)), float(tree.get("dt", 1.0)),
                           float(tree.get("sigma", 1.0)), tree.get("probabilities"))
    except KeyError as exc:
        raise ScenarioError(f"tree: missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"tree: {exc}") from None

    drv = obj.get("driver", {})
    if "f" not in drv:
        raise ScenarioError("driver: missing 'f'")
    coeffs = {name: _node_process(model, val, f"coefficient {name}")
              for name, val in (drv.get("coefficients") or {}).items()}
    cst = drv.get("constants") or {}
    try:
        constants = Constants(
            r=_node_process(model, cst.get("r", 1.0), "constants.r", coeffs),
            h=_node_process(model, cst.get("h", 1.0), "constants.h", coeffs),
            lam=float(cst.get("lambda", 1.0)),
            lam_qg=_growth(cst.get("lambda_qg"), "constants.lambda_qg", Growth("constant", max(1.0, float(cst.get("lambda", 1.0))))),
            rho=_growth(cst.get("rho"), "constants.rho", Growth("constant", 1.0)),
            rho_prime=_growth(cst.get("rho_prime"), "constants.rho_prime", Growth("constant", 1.0)),
            mu=None if cst.get("mu") is None else float(cst["mu"]),
            phi=None if cst.get("phi") is None else _growth(cst["phi"], "constants.phi", None),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"constants: {exc}") from None
    family = drv.get("family", "lipschitz_y")
    if family not in FAMILIES:
        raise ScenarioError(f"driver.family must be one of {FAMILIES}")
    try:
        g = _node_process(model, drv.get("g", 0.0), "driver.g", coeffs)
        nu = _node_process(model, drv.get("nu", 0.0), "driver.nu", coeffs)
        spec = DriverSpec.build(model, drv["f"], g=g, nu=nu, constants=constants, family=family,
                                coefficients=coeffs)
        xi = _leaf_values(model, obj.get("terminal", {"constant": 0.0}), "terminal")
        data = RBSDEData.build(spec, xi, _obstacle(model, obj.get("obstacle")))
        data.check_feasible()
        _ = data.alpha  # evaluates the driver at every internal node
    except DriverSyntaxError as exc:
        raise ScenarioError(f"driver.f: {exc}") from None
    except ScenarioError:
        raise
    except RBSDEError as exc:
        raise ScenarioError(str(exc)) from None

    opt = obj.get("options") or {}
    options = Options(
        solver=str(opt.get("solver", "full")), tol=float(opt.get("tol", 1e-10)),
        max_iter=int(opt.get("max_iter", 200)), force_gate=bool(opt.get("force_gate", False)),
        seed=int(opt.get("seed", 0)), n_split=None if opt.get("n_split") is None else int(opt["n_split"]),
    )
    if options.solver not in SOLVERS:
        raise ScenarioError(f"options.solver must be one of {SOLVERS}")
    extras = {k: obj[k] for k in ("stability",) if k in obj}
    return Scenario(model, data, options, obj, source, extras)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_scenario(obj, str(path))
