"""Seeded acceptance suite.

Every criterion draws its instances from its own generator
``default_rng([seed, criterion, ...])``, so criteria can run in any order or
in parallel processes and still produce the same report.  Runtimes are kept
out of the report (they go into :attr:`SuiteResult.timings`) so that two runs
with the same seed serialise to identical bytes.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    apriori_bmo_bound, check_special_comparison, compare_solutions, comparison_kernel_bound,
    stability_experiment,
)
from .driver import drift, validate_ordering
from .instances import monotone_instance, ordered_pair, random_instance, random_tree
from .lattice import TreeModel
from .norms import linf_norms
from .reports import dumps
from .snell import check_invariants, snell_oracle, solve_underlying
from .solver import (
    CONTRACTION_LIMIT, budget_for, data_size, picard_solve, solve_backward, solve_full,
    solve_monotone,
)

SOLVE_TOL = 1e-13
RUNTIME_LIMITS = {1: 30.0, 3: 60.0}
NAMES = {
    1: "snell oracle equivalence",
    2: "solution invariants",
    3: "gated contraction",
    4: "splitting consistency",
    5: "gauge round trip",
    6: "comparison",
    7: "special comparison",
    8: "a priori bound",
    9: "stability",
    10: "monotone a priori bound",
    11: "determinism",
}


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([seed, *key])


def _gated_instance(seed_key: tuple, model: TreeModel, family: str, u: float, linear: bool = True):
    """Instance whose single-shot data size is ``u * epsilon0``.

    The generator draws the same coefficients for every ``data_scale`` and all
    data-size contributions scale linearly, so one unit-scale draw fixes the
    factor.
    """
    unit = random_instance(np.random.default_rng(list(seed_key)), model, family, 1.0, linear=linear)
    d1 = data_size(unit.data)
    eps = budget_for(unit.data).epsilon0
    inst = random_instance(np.random.default_rng(list(seed_key)), model, family, u * eps / d1, linear=linear)
    return inst


def _summary(values, worst: str = "max") -> float:
    vals = [v for v in values if v is not None]
    if not vals:
        return 0.0
    return float(max(vals) if worst == "max" else min(vals))


# ---------------------------------------------------------------------------
# criteria; each returns (result dict, solutions for the a priori check)

def c1_oracle(seed: int, n: int = 200):
    records = []
    for i in range(n):
        rng = _rng(seed, 1, i)
        quaternary = i % 2 == 1
        model = random_tree(rng, depth=(1, 3) if quaternary else (1, 4), branching=4 if quaternary else 2)
        inst = random_instance(rng, model, data_scale=float(rng.uniform(0.1, 1.0)))
        y = 0.5 * rng.standard_normal(model.n_nodes)
        dv = drift(inst.data, y)
        sol = solve_underlying(dv, inst.data.xi, inst.data.obstacle, model)
        ref = snell_oracle(dv, inst.data.xi, inst.data.obstacle, model)
        err = float(np.abs(sol.y.values - ref).max())
        records.append({"index": i, "depth": model.depth, "branching": model.branching,
                        "driver": inst.meta["key"], "max_abs_diff": err, "pass": err <= 1e-12})
    ok = all(r["pass"] for r in records)
    return {"pass": ok, "n": n, "tolerance": 1e-12,
            "max_abs_diff": _summary(r["max_abs_diff"] for r in records),
            "failures": [r for r in records if not r["pass"]]}, []


def _c2_solve(seed: int, i: int):
    rng = _rng(seed, 2, i)
    kind = ("picard", "full", "backward")[i % 3]
    if kind == "picard":
        model = random_tree(rng, depth=(2, 4))
        inst = _gated_instance((seed, 2, i, 1), model, "catalog", float(rng.uniform(0.2, 1.0)))
        sol, _ = picard_solve(inst.data, tol=SOLVE_TOL)
    elif kind == "full":
        model = random_tree(rng, depth=(2, 3))
        inst = random_instance(rng, model, data_scale=float(rng.uniform(0.002, 0.01)))
        sol = solve_full(inst.data, tol=SOLVE_TOL).solution
    else:
        model = random_tree(rng, depth=(2, 4))
        inst = random_instance(rng, model, data_scale=float(rng.uniform(0.2, 1.0)))
        sol = solve_backward(inst.data)
    return kind, inst, sol


def c2_invariants(seed: int, n: int = 200):
    records, sols = [], []
    for i in range(n):
        kind, inst, sol = _c2_solve(seed, i)
        data = inst.data
        rep = check_invariants(sol, drift(data, sol.y.values), data.xi, data.obstacle)
        records.append({"index": i, "solver": kind, "pass": rep.passed, **rep.to_dict()})
        sols.append((f"c2[{i}]", sol, data))
    ok = all(r["pass"] for r in records)
    return {"pass": ok, "n": n,
            "max_dynamics_residual": _summary(r["dynamics_residual"] for r in records),
            "max_barrier_violation": _summary(r["barrier_violation"] for r in records),
            "min_dk": _summary((r["min_dk"] for r in records), "min"),
            "max_skorohod": _summary(r["skorohod"] for r in records),
            "solvers": {k: sum(r["solver"] == k for r in records) for k in ("picard", "full", "backward")},
            "failures": [r for r in records if not r["pass"]]}, sols


def c3_contraction(seed: int, n: int = 50):
    records, sols = [], []
    for i in range(n):
        rng = _rng(seed, 3, i)
        model = random_tree(rng, depth=(2, 4))
        u = float(rng.uniform(0.2, 1.0))
        inst = _gated_instance((seed, 3, i, 1), model, "pure", u)
        budget = budget_for(inst.data)
        sol, trace = picard_solve(inst.data, budget=budget, tol=SOLVE_TOL)
        ok = bool(budget.gate_passed and trace.contraction_ok and trace.ball_ok)
        records.append({"index": i, "u": u, "epsilon0": budget.epsilon0, "r0": budget.r0,
                        "data_size": budget.data_size, "max_ratio": trace.max_ratio,
                        "final_norm": trace.final_norm, "n_iter": trace.n_iter, "pass": ok})
        sols.append((f"c3[{i}]", sol, inst.data))
    return {"pass": all(r["pass"] for r in records), "n": n,
            "ratio_limit": CONTRACTION_LIMIT + 0.05,
            "max_ratio": _summary(r["max_ratio"] for r in records),
            "max_norm_over_r0": _summary(r["final_norm"] / r["r0"] for r in records),
            "failures": [r for r in records if not r["pass"]]}, sols


def c4_splitting(seed: int, n: int = 20):
    records, sols = [], []
    for i in range(n):
        rng = _rng(seed, 4, i)
        model = random_tree(rng, depth=(2, 3))
        gated = i % 2 == 0
        if gated:
            inst = _gated_instance((seed, 4, i, 1), model, "catalog", float(rng.uniform(0.2, 1.0)))
        else:
            inst = random_instance(rng, model, data_scale=float(rng.uniform(0.001, 0.005)))
        res = solve_full(inst.data, tol=SOLVE_TOL)
        n1 = res.n_split
        res2 = solve_full(inst.data, tol=SOLVE_TOL, n_split=2 * n1)
        diff = float(np.abs(res.solution.y.values - res2.solution.y.values).max())
        rec = {"index": i, "n_split": n1, "n_vs_2n": diff, "pass": diff <= 1e-8}
        if budget_for(inst.data).gate_passed:
            direct, _ = picard_solve(inst.data, tol=SOLVE_TOL)
            dd = float(np.abs(direct.y.values - res.solution.y.values).max())
            rec.update({"single_shot_gate": True, "vs_picard": dd, "pass": rec["pass"] and dd <= 1e-8})
            sols.append((f"c4[{i}].picard", direct, inst.data))
        else:
            rec["single_shot_gate"] = False
        records.append(rec)
        sols.append((f"c4[{i}]", res.solution, inst.data))
    gated = [r for r in records if r["single_shot_gate"]]
    return {"pass": all(r["pass"] for r in records) and len(gated) >= 10, "n": n,
            "n_gated": len(gated), "max_n_vs_2n": _summary(r["n_vs_2n"] for r in records),
            "max_vs_picard": _summary(r.get("vs_picard") for r in records),
            "failures": [r for r in records if not r["pass"]]}, sols


def c5_gauge(seed: int, n: int = 20):
    records, sols = [], []
    for i in range(n):
        rng = _rng(seed, 5, i)
        model = random_tree(rng, depth=(2, 3), branching=4)
        inst = random_instance(rng, model, data_scale=float(rng.uniform(0.005, 0.02)))
        while abs(inst.meta["nu"]) < 0.05 or abs(inst.meta["g"]) < 0.01:
            inst = random_instance(rng, model, data_scale=float(rng.uniform(0.005, 0.02)))
        gauge, _ = picard_solve(inst.data, tol=SOLVE_TOL, force=True, gauge="auto")
        direct, _ = picard_solve(inst.data, tol=SOLVE_TOL, force=True, gauge="direct")
        diff = float(np.abs(gauge.y.values - direct.y.values).max())
        dk = float(np.abs(gauge.dk - direct.dk).max())
        records.append({"index": i, "driver": inst.meta["driver"], "y_diff": diff, "dk_diff": dk,
                        "pass": diff <= 1e-9 and dk <= 1e-9})
        sols.append((f"c5[{i}]", gauge, inst.data))
    return {"pass": all(r["pass"] for r in records), "n": n,
            "max_y_diff": _summary(r["y_diff"] for r in records),
            "max_dk_diff": _summary(r["dk_diff"] for r in records),
            "failures": [r for r in records if not r["pass"]]}, sols


def c6_comparison(seed: int, n: int = 100):
    records, sols, skipped = [], [], 0
    i = 0
    while len(records) < n:
        rng = _rng(seed, 6, i)
        i += 1
        inst = random_instance(rng, random_tree(rng, depth=(2, 4)), data_scale=0.5)
        data, data_p, shifts = ordered_pair(rng, inst, scale=0.5)
        validate_ordering(data, data_p)
        sol, sol_p = solve_backward(data), solve_backward(data_p)
        kb = comparison_kernel_bound(sol, sol_p, data)
        if kb >= 1.0:
            skipped += 1
            continue
        rep = compare_solutions(sol, sol_p, kernel_bound=kb)
        records.append({"index": i - 1, "pass": rep.passed, **shifts, **rep.to_dict()})
        sols += [(f"c6[{i - 1}]", sol, data), (f"c6[{i - 1}]'", sol_p, data_p)]
    return {"pass": all(r["pass"] for r in records), "n": n, "skipped_step_size": skipped,
            "max_excess": _summary(r["max_excess"] for r in records),
            "max_kernel_bound": _summary(r["kernel_bound"] for r in records),
            "failures": [r for r in records if not r["pass"]]}, sols


def c7_special(seed: int, n: int = 50):
    records, sols, redrawn = [], [], 0
    i = 0
    while len(records) < n:
        rng = _rng(seed, 7, i)
        i += 1
        inst = random_instance(rng, random_tree(rng, depth=(2, 4)), data_scale=0.5, binding=True)
        data, data_p, shifts = ordered_pair(rng, inst, shared_obstacle=True, scale=0.5)
        sol, sol_p = solve_backward(data), solve_backward(data_p)
        if sol.dk.max() <= 0 and sol_p.dk.max() <= 0:
            redrawn += 1
            continue
        rep = check_special_comparison(sol, sol_p, data, data_p)
        records.append({"index": i - 1, "pass": rep.passed, **shifts, **rep.to_dict()})
        sols += [(f"c7[{i - 1}]", sol, data), (f"c7[{i - 1}]'", sol_p, data_p)]
    return {"pass": all(r["pass"] for r in records), "n": n, "redrawn_not_binding": redrawn,
            "max_excess": _summary(r["max_excess"] for r in records),
            "strict_nodes_total": sum(r["strict_nodes"] for r in records),
            "failures": [r for r in records if not r["pass"]]}, sols


def c8_apriori(solutions) -> dict:
    records = []
    for label, sol, data in solutions:
        rep = apriori_bmo_bound(sol, data)
        records.append({"label": label, "pass": rep.passed, "lhs": rep.lhs, "rhs": rep.rhs,
                        "slack_ratio": rep.slack_ratio})
    return {"pass": all(r["pass"] for r in records), "n": len(records),
            "max_slack_ratio": _summary(r["slack_ratio"] for r in records),
            "failures": [r for r in records if not r["pass"]]}


def c9_stability(seed: int, n_pairs: int = 30, per_base: int = 2):
    records, skipped = [], []
    base_idx = 0
    while len(records) < n_pairs:
        rng = _rng(seed, 9, base_idx)
        model = random_tree(rng, depth=(2, 3))
        inst = random_instance(rng, model, data_scale=float(rng.uniform(0.1, 0.5)))
        base = solve_backward(inst.data)
        probe = stability_experiment(inst.data, [], base=base)
        gate = probe.gate
        deltas = []
        for _ in range(per_base):
            pair = []
            for _ in range(2):
                share = float(rng.uniform(0.2, 0.8))
                size = gate * float(rng.uniform(0.2, 0.9))
                dxi = rng.uniform(-1, 1, model.n_leaves)
                dxi *= share * size / np.abs(dxi).max()
                # keep the perturbed terminal value above a touching obstacle
                dxi = np.maximum(dxi, inst.data.terminal_obstacle - inst.data.xi)
                dal = rng.uniform(-1, 1, model.n_internal)
                l1, _ = linf_norms(dal, model)
                dal *= (1 - share) * size / l1
                pair.append((dxi, dal))
            deltas.append(tuple(pair))
        rep = stability_experiment(inst.data, deltas, base=base)
        for p in rep.pairs:
            if len(records) < n_pairs:
                records.append({"base": base_idx, "beta_bar_linf1": rep.beta_bar_linf1, "gate": rep.gate,
                                "pass": bool(p["y_bound_ok"] and p["bmo_q_bound_ok"]
                                             and p.get("halving_ok", True)), **p})
        skipped += [{"base": base_idx, **s} for s in rep.skipped]
        base_idx += 1
    ratios = [r["pq_ratio"] for r in records if r["pq_ratio"] is not None]
    return {"pass": all(r["pass"] for r in records), "n": len(records), "skipped": skipped,
            "max_dy_over_bound": _summary(r["dy_sup"] / r["bound"] for r in records if r["bound"] > 0),
            "max_bmo_q_over_bound": _summary(r["bmo_q"] / r["bound"] for r in records if r["bound"] > 0),
            "pq_ratio_range": [min(ratios), max(ratios)] if ratios else None,
            "halving_ratio_range": [min(r.get("halving_ratio", 0.5) for r in records),
                                    max(r.get("halving_ratio", 0.5) for r in records)],
            "failures": [r for r in records if not r["pass"]]}, []


def c10_monotone(seed: int, n: int = 20):
    records = []
    for i in range(n):
        rng = _rng(seed, 10, i)
        inst = monotone_instance(rng, random_tree(rng, depth=(2, 3)), data_scale=0.002)
        res = solve_monotone(inst.data, tol=SOLVE_TOL)
        notes = res.notes
        records.append({"index": i, "driver": inst.meta["driver"], "n_split": res.n_split,
                        "sup_sq": notes["sup_sq"], "bound_sq": notes["monotone_bound_sq"],
                        "pass": bool(notes["monotone_bound_ok"])})
    return {"pass": all(r["pass"] for r in records), "n": n,
            "max_ratio": _summary(r["sup_sq"] / r["bound_sq"] for r in records if r["bound_sq"] > 0),
            "failures": [r for r in records if not r["pass"]]}, []


CRITERIA = {1: c1_oracle, 2: c2_invariants, 3: c3_contraction, 4: c4_splitting, 5: c5_gauge,
            6: c6_comparison, 7: c7_special, 9: c9_stability, 10: c10_monotone}


def _run_one(args):
    cid, seed = args
    t0 = time.perf_counter()
    res, sols = CRITERIA[cid](seed)
    elapsed = time.perf_counter() - t0
    apriori = c8_apriori(sols) if sols else None
    return cid, res, apriori, elapsed


@dataclass
class SuiteResult:
    seed: int
    report: dict
    timings: dict = field(default_factory=dict)

    def line(self, cid: int) -> str:
        entry = self.report["criteria"][str(cid)]
        status = "PASS" if self.passed(cid) else "FAIL"
        extra = f" ({self.timings[cid]:.1f}s)" if cid in self.timings else ""
        return f"criterion {cid:2d} {NAMES[cid]:<26s} {status}{extra}  {_headline(entry)}"

    def passed(self, cid: int) -> bool:
        ok = bool(self.report["criteria"][str(cid)]["pass"])
        limit = RUNTIME_LIMITS.get(cid)
        if limit is not None and cid in self.timings:
            ok = ok and self.timings[cid] < limit
        return ok

    @property
    def all_passed(self) -> bool:
        return all(self.passed(int(c)) for c in self.report["criteria"])

    def to_json(self) -> str:
        return dumps(self.report)


def _headline(entry: dict) -> str:
    keys = [k for k, v in entry.items() if isinstance(v, (int, float)) and not isinstance(v, bool)
            and k != "pass"]
    return ", ".join(f"{k}={entry[k]:.3g}" if isinstance(entry[k], float) else f"{k}={entry[k]}"
                     for k in keys[:4])


def run_suite(seed: int = 0, parallel: int = 1, criteria=None, determinism: bool = True) -> SuiteResult:
    """Run the criteria (all by default); criterion 11 reruns the suite and compares bytes."""
    ids = sorted(CRITERIA) if criteria is None else sorted(c for c in criteria if c in CRITERIA)
    want8 = criteria is None or 8 in criteria
    results = _run_many(ids, seed, parallel)
    report, timings = _assemble(seed, results, want8)
    if determinism and (criteria is None or 11 in criteria):
        t0 = time.perf_counter()
        again, _ = _assemble(seed, _run_many(ids, seed, parallel), want8)
        same = dumps(report) == dumps(again)
        timings[11] = time.perf_counter() - t0
        report["criteria"]["11"] = {"pass": same, "runs": 2, "identical": same}
    return SuiteResult(seed, report, timings)


def _run_many(ids, seed, parallel):
    jobs = [(cid, seed) for cid in ids]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(job) for job in jobs]


def _assemble(seed, results, want8):
    criteria, timings, aprioris = {}, {}, []
    for cid, res, apriori, elapsed in sorted(results, key=lambda r: r[0]):
        criteria[str(cid)] = res
        timings[cid] = elapsed
        if apriori is not None and cid <= 7:
            aprioris.append((cid, apriori))
    if want8 and aprioris:
        criteria["8"] = {
            "pass": all(a["pass"] for _, a in aprioris),
            "n": sum(a["n"] for _, a in aprioris),
            "by_criterion": {str(c): {"n": a["n"], "max_slack_ratio": a["max_slack_ratio"]} for c, a in aprioris},
            "max_slack_ratio": max(a["max_slack_ratio"] for _, a in aprioris),
            "failures": [f for _, a in aprioris for f in a["failures"]],
        }
    ordered = {k: criteria[k] for k in sorted(criteria, key=int)}
    return {"schema": "qrbsde-acceptance/1", "seed": int(seed), "criteria": ordered,
            "pass": all(v["pass"] for v in ordered.values())}, timings


__all__ = ["CRITERIA", "NAMES", "SuiteResult", "run_suite"]
