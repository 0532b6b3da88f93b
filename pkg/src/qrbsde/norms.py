"""Exact tree analogues of the S-infinity, BMO, L2_BMO, L^{inf,p} and A_BMO norms.

On a finite tree the supremum over stopping times of a conditional
expectation of remaining quantities is attained at some node, so every sup
below is a max over nodes and is reported together with the node.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .errors import ContractError
from .lattice import AdaptedProcess, MartingaleParts, Measure, NodeId, TreeModel, decompose

K_TOL = 1e-12


@dataclass
class NormReport:
    s_inf: float = 0.0
    bmo_sq: float = 0.0
    k_abmo: float = 0.0
    linf1: float = 0.0
    linf2_sq: float = 0.0
    solution_norm_sq: float = 0.0
    argmax_node: dict[str, str] | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, AdaptedProcess) else np.asarray(x, dtype=float)


def _argmax(arr: np.ndarray) -> tuple[float, int]:
    v = int(np.argmax(arr))
    return float(arr[v]), v


def sup_norm(y, return_node: bool = False):
    a = np.abs(_values(y))
    val, v = _argmax(a)
    return (val, v) if return_node else val


def remaining_bracket(parts: MartingaleParts, model: TreeModel, measure: Measure) -> np.ndarray:
    """``E[<N>_T - <N>_t | node]`` at every node, brackets taken under ``measure``."""
    x = parts.increments
    x = x - measure.expect_branches(x)[:, None]
    d_n = measure.expect_branches(x * x)
    return measure.accumulate(d_n)


def bmo_norm_sq(parts, model: TreeModel, measure: Measure | None = None, return_node: bool = False):
    """Squared BMO norm; ``parts`` may also be a node process, decomposed under ``measure``."""
    measure = model.P if measure is None else measure
    if not isinstance(parts, MartingaleParts):
        parts = decompose(model, parts, measure)
    val, v = _argmax(remaining_bracket(parts, model, measure))
    return (val, v) if return_node else val


def l2bmo_norm_sq(h, model: TreeModel, measure: Measure | None = None, return_node: bool = False):
    measure = model.P if measure is None else measure
    hv = _values(h)[: model.n_internal]
    val, v = _argmax(measure.accumulate(hv * hv * model.dt))
    return (val, v) if return_node else val


def linf_norms(x, model: TreeModel) -> tuple[float, float]:
    """``(max_path sum |x| dt, max_path sum x^2 dt)`` over internal-node values."""
    xv = _values(x)[: model.n_internal]
    b, d = model.branching, model.depth
    l1 = kernels.path_max(np.ascontiguousarray(np.abs(xv) * model.dt), b, d)[0]
    l2 = kernels.path_max(np.ascontiguousarray(xv * xv * model.dt), b, d)[0]
    return float(l1), float(l2)


def linf1_norm(x, model: TreeModel) -> float:
    return linf_norms(x, model)[0]


def linf2_sq_norm(x, model: TreeModel) -> float:
    return linf_norms(x, model)[1]


def check_accumulator(k, model: TreeModel, tol: float = K_TOL) -> None:
    kv = _values(k)
    if abs(kv[0]) > tol:
        raise ContractError(f"accumulator must start from 0, K(root) = {kv[0]:.3e}")
    steps = kv[model.children] - kv[: model.n_internal, None]
    if steps.min() < -tol * max(1.0, np.abs(kv).max()):
        v, _ = np.unravel_index(int(np.argmin(steps)), steps.shape)
        raise ContractError(f"K decreases after node {model.node_id(int(v))}")


def k_abmo_norm(k, model: TreeModel, measure: Measure | None = None, return_node: bool = False):
    measure = model.P if measure is None else measure
    check_accumulator(k, model)
    kv = _values(k)
    inc = measure.expect_next(kv) - kv[: model.n_internal]
    val, v = _argmax(measure.accumulate(inc))
    return (val, v) if return_node else val


def solution_norm_sq(y, parts, model: TreeModel, measure: Measure | None = None) -> float:
    return sup_norm(y) ** 2 + bmo_norm_sq(parts, model, measure)


def norm_report(model: TreeModel, y=None, parts=None, k=None, x=None,
                measure: Measure | None = None) -> NormReport:
    """Collect whichever norms the supplied components allow."""
    rep = NormReport(argmax_node={})
    node = lambda v: str(model.node_id(v))  # noqa: E731
    if y is not None:
        rep.s_inf, v = sup_norm(y, return_node=True)
        rep.argmax_node["s_inf"] = node(v)
    if parts is not None:
        rep.bmo_sq, v = bmo_norm_sq(parts, model, measure, return_node=True)
        rep.argmax_node["bmo_sq"] = node(v)
    if k is not None:
        rep.k_abmo, v = k_abmo_norm(k, model, measure, return_node=True)
        rep.argmax_node["k_abmo"] = node(v)
    if x is not None:
        rep.linf1, rep.linf2_sq = linf_norms(x, model)
    if y is not None and parts is not None:
        rep.solution_norm_sq = rep.s_inf**2 + rep.bmo_sq
    return rep


__all__ = [
    "NormReport", "NodeId", "sup_norm", "bmo_norm_sq", "l2bmo_norm_sq", "linf_norms",
    "linf1_norm", "linf2_sq_norm", "k_abmo_norm", "solution_norm_sq", "norm_report",
    "remaining_bracket", "check_accumulator",
]
