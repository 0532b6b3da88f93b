"""Checks of the quantitative statements on solver output: a priori BMO bound,
comparison, comparison of reflection increments, and local stability."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .driver import RBSDEData, stable_partials, validate_ordering
from .errors import ContractError, GateError, InfeasibleError, OrderingError, StepSizeError
from .lattice import Measure, TreeModel, decompose, girsanov
from .norms import bmo_norm_sq, k_abmo_norm, l2bmo_norm_sq, linf_norms, sup_norm
from .snell import Solution
from .solver import epsilon0, solve_backward, solve_perturbation

COMPARISON_TOL = 1e-9


@dataclass
class BoundReport:
    lhs: float
    rhs: float
    passed: bool
    slack_ratio: float
    details: dict = field(default_factory=dict)

    @classmethod
    def make(cls, lhs: float, rhs: float, **details) -> "BoundReport":
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        return cls(float(lhs), float(rhs), bool(lhs <= rhs), float(ratio), details)

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "pass": self.passed,
                "slack_ratio": self.slack_ratio, **self.details}


def nu_bmo_sq(data: RBSDEData, measure: Measure | None = None) -> float:
    model = data.model
    measure = model.P if measure is None else measure
    inc = data.driver.nu
    inc = inc - measure.expect_branches(inc)[:, None]
    return float(measure.accumulate(np.ascontiguousarray(measure.expect_branches(inc * inc))).max())


def apriori_bmo_bound(sol: Solution, data: RBSDEData, model: TreeModel | None = None) -> BoundReport:
    """``|K|_ABMO + |N|^2_BMO <= exp(8b|Y|)/(2b) [1 + 4b(Lam |h|^2 + |nu|^2)]``
    with ``Lam = lambda(|Y|)`` and ``b = Lam + 1 + |g|``."""
    model = sol.model if model is None else model
    c = data.driver.constants
    y_sup = sup_norm(sol.y)
    lam_cap = float(c.lam_qg(y_sup))
    g_sup = float(np.abs(data.driver.g[: model.n_internal]).max())
    b = lam_cap + 1.0 + g_sup
    h_sq = l2bmo_norm_sq(c.h, model)
    nu_sq = nu_bmo_sq(data)
    k_norm = k_abmo_norm(sol.k, model)
    n_norm = bmo_norm_sq(decompose(model, sol.y), model)
    lhs = k_norm + n_norm
    expo = 8.0 * b * y_sup
    rhs = math.exp(expo) / (2.0 * b) * (1.0 + 4.0 * b * (lam_cap * h_sq + nu_sq)) if expo < 700 else math.inf
    return BoundReport.make(lhs, rhs, b=b, Lambda=lam_cap, y_sup=y_sup, k_abmo=k_norm, n_bmo_sq=n_norm,
                            h_l2bmo_sq=h_sq, nu_bmo_sq=nu_sq)


@dataclass
class ComparisonReport:
    passed: bool
    max_excess: float
    worst_node: str
    kernel_bound: float
    y0: float
    y0_prime: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def comparison_kernel_bound(sol: Solution, sol_prime: Solution, data: RBSDEData) -> float:
    """Largest per-branch kernel of the linearised difference equation.

    ``f_z`` is taken at both solutions, which bounds the difference quotient
    for drivers that are convex or concave in ``z`` and is a close estimate
    otherwise; the orthogonal part uses ``nu + g (N_perp + N'_perp)``.
    """
    model = sol.model
    n = model.n_internal
    pa = decompose(model, sol.y)
    pb = decompose(model, sol_prime.y)
    nodes = np.arange(n)
    f = data.driver.f
    _, fz_a = stable_partials(f, sol.y.values[:n], pa.z * model.sigma, nodes)
    _, fz_b = stable_partials(f, sol_prime.y.values[:n], pb.z * model.sigma, nodes)
    gam = np.maximum(np.abs(fz_a), np.abs(fz_b))
    perp = data.driver.nu + data.driver.g[:n, None] * (pa.orth + pb.orth)
    kern = gam[:, None] * np.abs(model.dm[None, :]) / model.sigma + np.abs(perp)
    return float(kern.max())


def check_comparison(data: RBSDEData, data_prime: RBSDEData, model: TreeModel | None = None,
                     tol: float = COMPARISON_TOL, solve=solve_backward, grid=None) -> ComparisonReport:
    """Solve both problems and check ``Y' <= Y + tol`` at every node."""
    model = data.model if model is None else model
    validate_ordering(data, data_prime, grid)
    sol = solve(data)
    sol_prime = solve(data_prime)
    kb = comparison_kernel_bound(sol, sol_prime, data)
    if kb >= 1.0:
        raise StepSizeError(f"comparison kernel reaches {kb:.3g} >= 1; reduce dt")
    return compare_solutions(sol, sol_prime, tol, kb)


def compare_solutions(sol: Solution, sol_prime: Solution, tol: float = COMPARISON_TOL,
                      kernel_bound: float = float("nan")) -> ComparisonReport:
    model = sol.model
    excess = sol_prime.y.values - sol.y.values
    v = int(np.argmax(excess))
    return ComparisonReport(bool(excess[v] <= tol), float(excess[v]), str(model.node_id(v)),
                            kernel_bound, sol.y0, sol_prime.y0)


@dataclass
class SpecialComparisonReport:
    passed: bool
    max_excess: float
    worst_node: str
    binding_nodes: int
    strict_nodes: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_special_comparison(sol: Solution, sol_prime: Solution, data: RBSDEData,
                             data_prime: RBSDEData, model: TreeModel | None = None,
                             tol: float = COMPARISON_TOL) -> SpecialComparisonReport:
    """With a shared obstacle and ``Y' <= Y``, check ``dK <= dK' + tol`` node-wise."""
    model = sol.model if model is None else model
    if data.obstacle.shape != data_prime.obstacle.shape or np.any(data.obstacle != data_prime.obstacle):
        raise ContractError("special comparison requires the same obstacle in both problems")
    gap = sol_prime.y.values - sol.y.values
    if gap.max() > tol:
        v = int(np.argmax(gap))
        raise OrderingError(f"Y' exceeds Y by {gap[v]:.3e} at node {model.node_id(v)}")
    excess = sol.dk - sol_prime.dk
    v = int(np.argmax(excess))
    binding = int(np.count_nonzero(sol.dk > 0) + np.count_nonzero(sol_prime.dk > 0))
    strict = int(np.count_nonzero(sol_prime.dk - sol.dk > tol))
    return SpecialComparisonReport(bool(excess[v] <= tol), float(excess[v]), str(model.node_id(v)),
                                   binding, strict)


# ---------------------------------------------------------------------------
# stability

@dataclass
class StabilityReport:
    pairs: list[dict]
    skipped: list[dict]
    beta_bar_linf1: float
    gate: float

    @property
    def passed(self) -> bool:
        return all(p["y_bound_ok"] and p["bmo_q_bound_ok"] and p.get("halving_ok", True)
                   for p in self.pairs)

    def to_dict(self) -> dict:
        return {"pass": self.passed, "beta_bar_linf1": self.beta_bar_linf1, "gate": self.gate,
                "pairs": self.pairs, "skipped": self.skipped}


def _size(model: TreeModel, dxi, dalpha) -> float:
    l1, _ = linf_norms(dalpha, model)
    return float(np.abs(dxi).max() + l1)


def linearisation_measure(base: Solution, data: RBSDEData) -> tuple[np.ndarray, Measure]:
    """``beta_bar = f_y`` at the base and Q from ``f_z sigma^-1 dM + nu + 2 g dN_perp``."""
    model = base.model
    n = model.n_internal
    parts = decompose(model, base.y)
    fy, fz = stable_partials(data.driver.f, base.y.values[:n], parts.z * model.sigma, np.arange(n))
    kern = (fz[:, None] / model.sigma * model.dm[None, :] + data.driver.nu
            + 2.0 * data.driver.g[:n, None] * parts.orth)
    return fy, girsanov(model, model.P, np.ascontiguousarray(kern), tag="Q_bar")


def stability_experiment(base_data: RBSDEData, deltas, model: TreeModel | None = None,
                         base: Solution | None = None, halving: bool = True,
                         tol: float = 1e-11) -> StabilityReport:
    """For each pair ``((dxi', dalpha'), (dxi'', dalpha''))`` solve both perturbed
    problems from the base and compare distances with ``32 exp(2|beta_bar|) dD``."""
    model = base_data.model if model is None else model
    base = solve_backward(base_data) if base is None else base
    beta_bar, q = linearisation_measure(base, base_data)
    b1, _ = linf_norms(beta_bar, model)
    _, r2 = linf_norms(base_data.driver.constants.r, model)
    gate = epsilon0(2.0 * base_data.driver.constants.lam, r2, b1) / math.sqrt(2.0)
    const = 32.0 * math.exp(2.0 * b1)

    def perturbed(delta):
        dxi, dalpha = delta
        return solve_perturbation(base, (dxi, dalpha), base_data, model, rho=0.0, tol=tol,
                                  force=True).total

    pairs, skipped = [], []
    for idx, (d1, d2) in enumerate(deltas):
        d1 = tuple(np.broadcast_to(np.asarray(a, dtype=float), s)
                   for a, s in zip(d1, ((model.n_leaves,), (model.n_internal,))))
        d2 = tuple(np.broadcast_to(np.asarray(a, dtype=float), s)
                   for a, s in zip(d2, ((model.n_leaves,), (model.n_internal,))))
        s1, s2 = _size(model, *d1), _size(model, *d2)
        if s1 > gate or s2 > gate:
            skipped.append({"index": idx, "reason": f"perturbation size {max(s1, s2):.4g} above gate {gate:.4g}"})
            continue
        dd = _size(model, d2[0] - d1[0], d2[1] - d1[1])
        try:
            y1, y2 = perturbed(d1), perturbed(d2)
        except (GateError, InfeasibleError, StepSizeError) as exc:
            skipped.append({"index": idx, "reason": str(exc)})
            continue
        diff = y2.y.values - y1.y.values
        dy = sup_norm(diff)
        bmo_p = math.sqrt(bmo_norm_sq(diff, model))
        bmo_q = math.sqrt(bmo_norm_sq(diff, model, q))
        bound = const * dd
        rec = {"index": idx, "delta_d": dd, "dy_sup": dy, "bound": bound,
               "y_bound_ok": bool(dy <= bound), "bmo_p": bmo_p, "bmo_q": bmo_q,
               "bmo_q_bound_ok": bool(bmo_q <= bound),
               "pq_ratio": bmo_p / bmo_q if bmo_q > 0 else None,
               "ratio_dy_dd": dy / dd if dd > 0 else None}
        if halving and dd > 0 and dy > 0:
            mid = tuple(0.5 * (a + b) for a, b in zip(d1, d2))
            dy_half = sup_norm(perturbed(mid).y.values - y1.y.values)
            scale = dy_half / dy
            rec.update({"dy_half": dy_half, "halving_ratio": scale,
                        "halving_ok": bool(0.25 <= scale <= 1.0)})
        pairs.append(rec)
    return StabilityReport(pairs, skipped, b1, gate)


__all__ = [
    "BoundReport", "ComparisonReport", "SpecialComparisonReport", "StabilityReport",
    "apriori_bmo_bound", "check_comparison", "check_special_comparison", "compare_solutions",
    "comparison_kernel_bound", "linearisation_measure", "nu_bmo_sq", "stability_experiment",
]
