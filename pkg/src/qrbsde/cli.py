"""Command-line entry point.

Exit status: 0 when every check in the report passes, 1 when a check fails
or an iteration does not converge, 2 on input errors (unreadable or invalid
scenario, violated preconditions such as ordering or the smallness gate).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .acceptance import run_suite
from .analysis import (
    apriori_bmo_bound, check_special_comparison, compare_solutions, comparison_kernel_bound,
    stability_experiment,
)
from .driver import drift, validate_der, validate_monotone, validate_ordering, validate_qg
from .errors import ConvergenceError, RBSDEError
from .norms import linf_norms, norm_report
from .reports import dumps, envelope, write_csv, write_json
from .scenario import Scenario, load_scenario
from .snell import check_invariants, snell_oracle, solve_underlying
from .solver import (
    budget_for, monotone_bound_sq, picard_solve, solve_backward, solve_full, solve_monotone,
    solve_superlinear,
)


EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
ORACLE_TOL = 1e-12


class InputError(Exception):
    """Bad command-line usage, mapped to exit status 2."""


# ---------------------------------------------------------------------------
# helpers

def _options(args, sc: Scenario):
    opt = sc.options
    tol = opt.tol if args.tol is None else args.tol
    max_iter = opt.max_iter if args.max_iter is None else args.max_iter
    force = opt.force_gate or args.force_gate
    seed = opt.seed if args.seed is None else args.seed
    return tol, max_iter, force, seed


def _solve(sc: Scenario, tol: float, max_iter: int, force: bool):
    """Dispatch on the scenario's solver option and driver family.

    Returns ``(solution, budget dict or None, extra result fields)``.
    """
    data = sc.data
    kind = sc.options.solver
    if kind == "backward":
        return solve_backward(data), None, {"solver": "backward"}
    if kind == "picard":
        budget = budget_for(data)
        sol, trace = picard_solve(data, budget=budget, tol=tol, max_iter=max_iter, force=force)
        return sol, budget.to_dict(), {"solver": "picard", "trace": trace.to_dict()}
    family = data.driver.family
    n_split = sc.options.n_split
    if family == "monotone_y":
        res = solve_monotone(data, tol=tol, max_iter=max_iter, n_split=n_split, force=force)
    elif family == "superlinear_y":
        res = solve_superlinear(data, tol=tol, max_iter=max_iter, n_split=n_split, force=force)
    else:
        res = solve_full(data, tol=tol, max_iter=max_iter, n_split=n_split, force=force)
    extra = {"solver": f"full/{family}", "staged": res.to_dict(with_stages=False)}
    return res.solution, res.budget.to_dict(), extra


def _solution_fields(sol, data) -> dict:
    model = sol.model
    rep = norm_report(model, y=sol.y, parts=sol.parts, k=sol.k)
    inv = check_invariants(sol, drift(data, sol.y.values), data.xi, data.obstacle)
    return {"y0": sol.y0, "y": sol.y.values, "dk": sol.dk, "norms": rep, "invariants": inv.to_dict()}


def _node_columns(sol, data) -> dict:
    return {"y": sol.y.values, "obstacle": data.obstacle, "dk": sol.dk, "z": sol.parts.z}


def _emit(args, command: str, passed: bool, seed: int, result: dict, budget=None,
          scenario: dict | None = None) -> int:
    meta = {"created_unix": time.time(), "version": __version__} if args.stamp else None
    report = envelope(command, "pass" if passed else "fail", seed, result, budget, scenario, meta)
    if args.out:
        write_json(args.out, report)
    else:
        sys.stdout.write(dumps(report))
    print(f"{command}: {'pass' if passed else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAIL


def _write_csv(args, model, columns: dict) -> None:
    if args.csv:
        write_csv(args.csv, model, columns)


def _pair(args) -> tuple[Scenario, Scenario]:
    if not args.scenario_prime:
        raise InputError(f"{args.command} needs --scenario-prime")
    return load_scenario(args.scenario), load_scenario(args.scenario_prime)


def _solve_pair(args, sc, sc_p, tol, max_iter, force):
    jobs = [(sc, tol, max_iter, force), (sc_p, tol, max_iter, force)]
    if args.parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            return list(pool.map(lambda a: _solve(*a), jobs))
    return [_solve(*a) for a in jobs]


# ---------------------------------------------------------------------------
# subcommands

def cmd_solve(args) -> int:
    sc = load_scenario(args.scenario)
    tol, max_iter, force, seed = _options(args, sc)
    sol, budget, extra = _solve(sc, tol, max_iter, force)
    result = {**extra, **_solution_fields(sol, sc.data)}
    _write_csv(args, sc.model, _node_columns(sol, sc.data))
    ok = result["invariants"]["passed"]
    if "trace" in extra:
        ok = ok and extra["trace"]["converged"]
    return _emit(args, "solve", ok, seed, result, budget, sc.summary())


def cmd_oracle(args) -> int:
    sc = load_scenario(args.scenario)
    tol, max_iter, force, seed = _options(args, sc)
    data, model = sc.data, sc.model
    sol, budget, extra = _solve(sc, tol, max_iter, force)
    dv = drift(data, sol.y.values)
    rec = solve_underlying(dv, data.xi, data.obstacle, model)
    enum = snell_oracle(dv, data.xi, data.obstacle, model)
    diff = np.abs(rec.y.values - enum)
    v = int(np.argmax(diff))
    result = {**extra, "y0_recursion": rec.y0, "y0_enumeration": float(enum[0]),
              "y_recursion": rec.y.values, "y_enumeration": enum, "dk": rec.dk,
              "max_abs_diff": float(diff[v]), "worst_node": str(model.node_id(v)),
              "tolerance": ORACLE_TOL}
    _write_csv(args, model, {"y_recursion": rec.y.values, "y_enumeration": enum, "dk": rec.dk})
    return _emit(args, "oracle", bool(diff[v] <= ORACLE_TOL), seed, result, budget, sc.summary())


def cmd_compare(args) -> int:
    sc, sc_p = _pair(args)
    tol, max_iter, force, seed = _options(args, sc)
    validate_ordering(sc.data, sc_p.data)
    (sol, budget, _), (sol_p, _, _) = _solve_pair(args, sc, sc_p, tol, max_iter, force)
    kb = comparison_kernel_bound(sol, sol_p, sc.data)
    rep = compare_solutions(sol, sol_p, kernel_bound=kb)
    result = {"comparison": rep.to_dict(), "kernel_below_one": kb < 1.0,
              "y": sol.y.values, "y_prime": sol_p.y.values}
    _write_csv(args, sc.model, {"y": sol.y.values, "y_prime": sol_p.y.values,
                                "gap": sol.y.values - sol_p.y.values})
    return _emit(args, "compare", rep.passed and kb < 1.0, seed, result, budget, sc.summary())


def cmd_compare_k(args) -> int:
    sc, sc_p = _pair(args)
    tol, max_iter, force, seed = _options(args, sc)
    validate_ordering(sc.data, sc_p.data)
    (sol, budget, _), (sol_p, _, _) = _solve_pair(args, sc, sc_p, tol, max_iter, force)
    rep = check_special_comparison(sol, sol_p, sc.data, sc_p.data)
    result = {"special_comparison": rep.to_dict(), "dk": sol.dk, "dk_prime": sol_p.dk}
    _write_csv(args, sc.model, {"dk": sol.dk, "dk_prime": sol_p.dk})
    return _emit(args, "compare-k", rep.passed, seed, result, budget, sc.summary())


def cmd_perturb(args) -> int:
    sc = load_scenario(args.scenario)
    tol, max_iter, force, seed = _options(args, sc)
    family = sc.data.driver.family
    fn = {"monotone_y": solve_monotone, "superlinear_y": solve_superlinear}.get(family, solve_full)
    res = fn(sc.data, tol=tol, max_iter=max_iter, n_split=sc.options.n_split, force=force)
    result = {"staged": res.to_dict(with_stages=True), **_solution_fields(res.solution, sc.data)}
    _write_csv(args, sc.model, _node_columns(res.solution, sc.data))
    ok = result["invariants"]["passed"] and all(s.trace.contraction_ok for s in res.stages)
    return _emit(args, "perturb", ok, seed, result, res.budget.to_dict(), sc.summary())


def _default_deltas(rng, model, gate: float, data, count: int = 3):
    deltas = []
    for _ in range(count):
        pair = []
        for _ in range(2):
            size = gate * float(rng.uniform(0.2, 0.9))
            share = float(rng.uniform(0.2, 0.8))
            dxi = rng.uniform(-1, 1, model.n_leaves)
            dxi *= share * size / np.abs(dxi).max()
            dxi = np.maximum(dxi, data.terminal_obstacle - data.xi)
            dal = rng.uniform(-1, 1, model.n_internal)
            dal *= (1 - share) * size / linf_norms(dal, model)[0]
            pair.append((dxi, dal))
        deltas.append(tuple(pair))
    return deltas


def cmd_stability(args) -> int:
    sc = load_scenario(args.scenario)
    tol, max_iter, force, seed = _options(args, sc)
    data, model = sc.data, sc.model
    base, budget, _ = _solve(sc, tol, max_iter, force)
    spec = sc.extras.get("stability", {})
    if "pairs" in spec:
        try:
            deltas = [((p[0]["dxi"], p[0]["dalpha"]), (p[1]["dxi"], p[1]["dalpha"])) for p in spec["pairs"]]
        except (KeyError, IndexError, TypeError) as exc:
            raise InputError(f"stability.pairs: expected [[{{dxi, dalpha}}, {{dxi, dalpha}}], ...] ({exc})") from None
    else:
        gate = stability_experiment(data, [], base=base).gate
        deltas = _default_deltas(np.random.default_rng(seed), model, gate, data,
                                 int(spec.get("count", 3)))
    rep = stability_experiment(data, deltas, base=base)
    ok = rep.passed and bool(rep.pairs)
    return _emit(args, "stability", ok, seed, {"stability": rep.to_dict()}, budget, sc.summary())


def cmd_bounds(args) -> int:
    sc = load_scenario(args.scenario)
    tol, max_iter, force, seed = _options(args, sc)
    sol, budget, extra = _solve(sc, tol, max_iter, force)
    rep = apriori_bmo_bound(sol, sc.data)
    result = {**extra, "y0": sol.y0, "apriori_bmo": rep.to_dict()}
    ok = rep.passed
    c = sc.data.driver.constants
    if c.mu is not None and sc.data.obstacle.max() <= 0:
        bound = monotone_bound_sq(sc.data)
        lhs = float(np.abs(sol.y.values).max()) ** 2
        result["monotone"] = {"lhs": lhs, "rhs": bound, "pass": lhs <= bound * (1 + 1e-9)}
        ok = ok and result["monotone"]["pass"]
    return _emit(args, "bounds", ok, seed, result, budget, sc.summary())


def cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    _, _, _, seed = _options(args, sc)
    reports = [validate_qg(sc.data), validate_der(sc.data)]
    if sc.data.driver.constants.mu is not None:
        reports.append(validate_monotone(sc.data))
    ok = all(r.passed for r in reports)
    result = {"checks": [r.to_dict() for r in reports], "budget_single_shot": budget_for(sc.data).to_dict()}
    return _emit(args, "validate", ok, seed, result, None, sc.summary())


def cmd_acceptance(args) -> int:
    seed = 0 if args.seed is None else args.seed
    workers = args.parallel or 1
    suite = run_suite(seed, parallel=workers, determinism=not args.no_rerun)
    for cid in sorted(int(c) for c in suite.report["criteria"]):
        print(suite.line(cid), file=sys.stderr)
    if args.out:
        write_json(args.out, suite.report)
    else:
        sys.stdout.write(suite.to_json())
    return EXIT_OK if suite.all_passed else EXIT_FAIL


COMMANDS = {
    "solve": (cmd_solve, "solve a scenario (staged, Picard or backward per its options)"),
    "oracle": (cmd_oracle, "cross-check the backward recursion against stopping-rule enumeration"),
    "compare": (cmd_compare, "check Y' <= Y for ordered scenarios"),
    "compare-k": (cmd_compare_k, "check dK <= dK' for ordered scenarios with the same obstacle"),
    "perturb": (cmd_perturb, "staged solve with the per-stage trace"),
    "stability": (cmd_stability, "local Lipschitz experiment around the scenario's solution"),
    "bounds": (cmd_bounds, "a priori bound report on the solution"),
    "validate": (cmd_validate, "sample the driver assumptions"),
    "acceptance": (cmd_acceptance, "run the seeded acceptance suite"),
}


def _parallel(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a worker count") from None
    if n < 1:
        raise argparse.ArgumentTypeError("worker count must be positive")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrbsde", description="Reflected quadratic BSDEs on trees.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", metavar="PATH")
    common.add_argument("--scenario-prime", metavar="PATH")
    common.add_argument("--out", metavar="PATH", help="report path (default: stdout)")
    common.add_argument("--csv", metavar="PATH", help="per-node table")
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", type=int)
    common.add_argument("--force-gate", action="store_true", help="iterate past the smallness gate")
    common.add_argument("--seed", type=int)
    common.add_argument("--parallel", type=_parallel, nargs="?", const=os.cpu_count() or 2, default=None,
                        metavar="N", help="run independent solves concurrently")
    common.add_argument("--stamp", action="store_true", help="add a metadata block with a timestamp")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        if name == "acceptance":
            p.add_argument("--no-rerun", action="store_true", help="skip the determinism rerun")
    return parser


def main(argv=None) -> int:
    level = logging.getLevelName(os.environ.get("RBSDE_LOG", "WARNING").upper())
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "acceptance" and not args.scenario:
        parser.error(f"{args.command} needs --scenario")
    fn = COMMANDS[args.command][0]
    try:
        return fn(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (RBSDEError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
