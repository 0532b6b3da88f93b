"""Reflected problem with a frozen drift: backward recursion and an exhaustive
stopping-time oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ContractError, InfeasibleError, OracleRefusal
from .lattice import AdaptedProcess, MartingaleParts, Measure, TreeModel, decompose

ORACLE_MAX_DEPTH = 4
ORACLE_MAX_COUNT = 1_000_000
INVARIANT_TOL = 1e-10


@dataclass
class Solution:
    """``(Y, N, K)`` on a tree.

    ``dk`` holds the reflection charged at each internal node, so that
    ``K`` at a node is the sum of ``dk`` over its strict ancestors.
    ``parts`` is the martingale decomposition of ``Y`` under ``measure``.
    """

    model: TreeModel
    y: AdaptedProcess
    dk: np.ndarray
    parts: MartingaleParts
    measure: Measure
    dv: np.ndarray | None = None

    @property
    def measure_tag(self) -> str:
        return self.measure.tag

    @property
    def k(self) -> AdaptedProcess:
        per_branch = np.broadcast_to(self.dk[:, None], (self.model.n_internal, self.model.branching))
        return AdaptedProcess(self.model, self.model.path_sum(per_branch))

    @property
    def y0(self) -> float:
        return float(self.y.values[0])

    @classmethod
    def from_arrays(cls, model: TreeModel, y, dk, measure: Measure | None = None, dv=None) -> "Solution":
        measure = model.P if measure is None else measure
        yv = np.asarray(y.values if isinstance(y, AdaptedProcess) else y, dtype=float)
        return cls(model, AdaptedProcess(model, yv), np.asarray(dk, dtype=float),
                   decompose(model, yv, measure), measure, dv)


def _c(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=float)


def solve_underlying(dv, xi, obstacle, model: TreeModel, measure: Measure | None = None) -> Solution:
    """Backward recursion ``Y_i = max(E[Y_{i+1}] + dV_i, L_i)`` with ``dK_i = Y_i - Ytilde_i``."""
    measure = model.P if measure is None else measure
    dv = _c(np.broadcast_to(np.asarray(dv, dtype=float), (model.n_internal,)))
    xi = _c(np.broadcast_to(np.asarray(xi, dtype=float), (model.n_leaves,)))
    lo = _c(obstacle.values if isinstance(obstacle, AdaptedProcess) else obstacle)
    gap = xi - lo[model.leaves]
    if gap.min() < 0:
        k = int(np.argmin(gap))
        raise InfeasibleError(
            f"terminal value below obstacle at leaf {model.node_id(model.level_offsets[model.depth] + k)} "
            f"(xi = {xi[k]:.6g}, L = {lo[model.leaves][k]:.6g})")
    y, _ytilde, dk = kernels.snell_sweep(measure.probs, dv, xi, lo, model.branching, model.depth)
    return Solution(model, AdaptedProcess(model, y), dk, decompose(model, y, measure), measure, dv)


def stopping_value_count(branching: int, depth: int) -> int:
    """Number of stopping rules on a full subtree of the given depth."""
    count = 1
    for _ in range(depth):
        count = 1 + count**branching
    return count


def snell_oracle(dv, xi, obstacle, model: TreeModel, measure: Measure | None = None,
                 max_count: int = ORACLE_MAX_COUNT) -> np.ndarray:
    """Optimal stopping value at every node by enumerating all stopping rules.

    At each node the candidate values are ``L_v`` (stop now) and, for every
    combination of stopping rules on the children, ``dV_v + sum_k p_k a_k``.
    The node value is the largest candidate.  Nothing is pruned.
    """
    measure = model.P if measure is None else measure
    count = stopping_value_count(model.branching, model.depth)
    if model.depth > ORACLE_MAX_DEPTH or count > max_count:
        raise OracleRefusal(
            f"enumerating {count} stopping rules (depth {model.depth}, branching {model.branching}) "
            f"is too expensive; use solve_underlying instead")
    dv = np.broadcast_to(np.asarray(dv, dtype=float), (model.n_internal,))
    lo = np.asarray(obstacle.values if isinstance(obstacle, AdaptedProcess) else obstacle, dtype=float)
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (model.n_leaves,))
    if np.any(xi < lo[model.leaves]):
        raise InfeasibleError("terminal value below obstacle")

    sets: list[np.ndarray | None] = [None] * model.n_nodes
    value = np.empty(model.n_nodes)
    first_leaf = model.level_offsets[model.depth]
    for v in range(model.n_nodes - 1, -1, -1):
        if v >= first_leaf:
            s = np.array([xi[v - first_leaf]])
        else:
            p = measure.probs[v]
            kids = model.children[v]
            acc = p[0] * sets[kids[0]]
            for k in range(1, model.branching):
                acc = np.add.outer(acc, p[k] * sets[kids[k]]).ravel()
            s = np.concatenate(([lo[v]], dv[v] + acc))
            for c in kids:
                sets[c] = None
        sets[v] = s
        value[v] = s.max()
    return value


@dataclass
class SkorohodReport:
    max_product: float
    worst_node: str
    negative_dk: list[str]
    passed: bool

    def to_dict(self) -> dict:
        return {"max_product": self.max_product, "worst_node": self.worst_node,
                "negative_dk": self.negative_dk, "passed": self.passed}


def check_skorohod(sol: Solution, obstacle, tol: float = INVARIANT_TOL) -> SkorohodReport:
    model = sol.model
    lo = np.asarray(obstacle.values if isinstance(obstacle, AdaptedProcess) else obstacle, dtype=float)
    n = model.n_internal
    prod = np.abs(sol.dk * (sol.y.values[:n] - lo[:n]))
    v = int(np.argmax(prod))
    neg = [str(model.node_id(int(i))) for i in np.flatnonzero(sol.dk < -1e-12)]
    return SkorohodReport(float(prod[v]), str(model.node_id(v)), neg,
                          bool(prod[v] <= tol and not neg))


@dataclass
class InvariantReport:
    dynamics_residual: float
    terminal_residual: float
    barrier_violation: float
    min_dk: float
    skorohod: float
    martingale_mean: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_invariants(sol: Solution, dv, xi, obstacle, tol: float = INVARIANT_TOL) -> InvariantReport:
    """Verify dynamics, terminal value, barrier and Skorohod conditions.

    The dynamics ``Y_i = Y_{i+1} + dV_i + dK_i - dN_i`` are checked per
    branch, with ``dN`` rebuilt from ``Z dM + dN_perp`` of the stored
    decomposition; the martingale increments must be centred under the
    solution's measure.
    """
    model = sol.model
    n = model.n_internal
    y = sol.y.values
    lo = np.asarray(obstacle.values if isinstance(obstacle, AdaptedProcess) else obstacle, dtype=float)
    dv = np.broadcast_to(np.asarray(dv, dtype=float), (n,))
    parts = sol.parts
    probs = sol.measure.probs
    mean_m = probs @ model.dm
    dmt = model.dm[None, :] - mean_m[:, None]
    dn = parts.z[:, None] * dmt + parts.orth
    resid = y[:n, None] - (y[model.children] + dv[:, None] + sol.dk[:, None] - dn)
    scale = max(1.0, float(np.abs(y).max()))
    dyn = float(np.abs(resid).max())
    term = float(np.abs(y[model.leaves] - np.asarray(xi, dtype=float)).max())
    barrier = float(max(0.0, (lo - y).max()))
    mart = float(np.abs(np.einsum("ij,ij->i", probs, dn)).max())
    sk = check_skorohod(sol, lo, tol)
    min_dk = float(sol.dk.min()) if n else 0.0
    ok = (dyn <= tol * scale and term <= tol * scale and barrier <= tol * scale
          and min_dk >= -1e-12 * scale and sk.max_product <= tol * scale and mart <= tol * scale)
    return InvariantReport(dyn, term, barrier, min_dk, sk.max_product, mart, bool(ok))


def snell_bound(dv, xi, obstacle, model: TreeModel, measure: Measure | None = None) -> float:
    """``E[sum |dV|]`` sup plus ``max L^+`` plus ``max xi^+``: an upper bound for ``Y``."""
    measure = model.P if measure is None else measure
    dv = np.abs(np.broadcast_to(np.asarray(dv, dtype=float), (model.n_internal,)))
    lo = np.asarray(obstacle.values if isinstance(obstacle, AdaptedProcess) else obstacle, dtype=float)
    acc = measure.accumulate(np.ascontiguousarray(dv))
    return float(acc.max() + max(0.0, lo.max()) + max(0.0, np.asarray(xi).max()))


def require_solution_measure(sol: Solution, tag: str) -> None:
    if sol.measure.tag != tag:
        raise ContractError(f"expected a solution under {tag}, got {sol.measure.tag}")
