"""Finite filtrations: non-recombining trees, adapted processes, measures.

Nodes are stored breadth first: the root is node 0 and node ``v`` has
children ``b*v + 1, ..., b*v + b``. Every per-node array in the package
uses this flat layout; per-internal-node arrays are simply the first
``n_internal`` entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import ContractError, DomainError, ParameterError, StepSizeError

MEAN_TOL = 1e-12


@dataclass(frozen=True)
class NodeId:
    path: tuple[int, ...] = ()

    @property
    def time_index(self) -> int:
        return len(self.path)

    def __str__(self) -> str:
        return "root" if not self.path else "/".join(map(str, self.path))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class TreeModel:
    """Non-recombining binary or quaternary tree on the grid ``t_i = i*dt``.

    Binary trees carry the reference martingale only (full representation);
    quaternary trees add an independent coordinate ``W_perp`` with
    increments ``+-sqrt(dt)`` so that orthogonal martingales exist.
    """

    def __init__(self, depth: int, branching: int, dt: float, sigma: float,
                 base_probabilities: Sequence[float] | None = None):
        if int(depth) != depth or depth < 1:
            raise ParameterError(f"depth must be an integer >= 1, got {depth!r}")
        if branching not in (2, 4):
            raise ParameterError(f"branching must be 2 or 4, got {branching!r}")
        if not np.isfinite(dt) or dt <= 0:
            raise ParameterError(f"dt must be positive, got {dt!r}")
        if not np.isfinite(sigma) or sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {sigma!r}")
        self.depth = int(depth)
        self.branching = b = int(branching)
        self.dt = float(dt)
        self.sigma = float(sigma)
        self.horizon = self.depth * self.dt

        sq = np.sqrt(self.dt)
        if b == 2:
            eps1 = np.array([1.0, -1.0])
            eps2 = np.zeros(2)
        else:
            eps1 = np.array([1.0, 1.0, -1.0, -1.0])
            eps2 = np.array([1.0, -1.0, 1.0, -1.0])
        self.dm = _readonly(self.sigma * sq * eps1)
        self.dw = _readonly(sq * eps2)

        if base_probabilities is None:
            p = np.full(b, 1.0 / b)
        else:
            p = np.asarray(base_probabilities, dtype=float)
            if p.shape != (b,):
                raise ParameterError(f"base_probabilities must have {b} entries")
        if np.any(p <= 0) or abs(p.sum() - 1.0) > MEAN_TOL:
            raise ParameterError("branch probabilities must be positive and sum to 1")
        var = self.sigma**2 * self.dt
        if (abs(p @ self.dm) > MEAN_TOL or abs(p @ self.dm**2 - var) > MEAN_TOL * max(1.0, var)
                or abs(p @ self.dw) > MEAN_TOL or abs(p @ (self.dm * self.dw)) > MEAN_TOL):
            raise ParameterError(
                "base probabilities must make dM centred with variance sigma^2*dt "
                "and orthogonal to dW_perp")
        self.base_probabilities = _readonly(p)

        self.n_internal = (b**self.depth - 1) // (b - 1)
        self.n_nodes = (b ** (self.depth + 1) - 1) // (b - 1)
        self.n_leaves = b**self.depth
        self.level_offsets = tuple((b**t - 1) // (b - 1) for t in range(self.depth + 2))

        level = np.empty(self.n_nodes, dtype=np.int64)
        for t in range(self.depth + 1):
            level[self.level_offsets[t]:self.level_offsets[t + 1]] = t
        self.level = _readonly(level)
        self.time = _readonly(level * self.dt)
        idx = np.arange(self.n_internal)
        self.children = _readonly(b * idx[:, None] + 1 + np.arange(b)[None, :])
        parent = np.full(self.n_nodes, -1, dtype=np.int64)
        parent[1:] = (np.arange(1, self.n_nodes) - 1) // b
        self.parent = _readonly(parent)
        branch = np.full(self.n_nodes, -1, dtype=np.int64)
        branch[1:] = (np.arange(1, self.n_nodes) - 1) % b
        self.branch = _readonly(branch)

        self.m_value = _readonly(self.path_sum(np.broadcast_to(self.dm, (self.n_internal, b))))
        self.w_value = _readonly(self.path_sum(np.broadcast_to(self.dw, (self.n_internal, b))))

        probs = np.ascontiguousarray(np.broadcast_to(p, (self.n_internal, b)), dtype=float)
        self.P = Measure(self, _readonly(probs), _readonly(np.ones(self.n_nodes)), "P")

    def path_sum(self, per_branch: np.ndarray) -> np.ndarray:
        """Node process accumulating ``per_branch[parent, branch]`` from 0 at the root."""
        out = np.zeros(self.n_nodes)
        off = self.level_offsets
        for t in range(self.depth):
            lo, hi = off[t], off[t + 1]
            out[off[t + 1]:off[t + 2]] = (out[lo:hi, None] + per_branch[lo:hi]).ravel()
        return out

    def path_product(self, per_branch: np.ndarray) -> np.ndarray:
        """Node process multiplying ``per_branch[parent, branch]`` from 1 at the root."""
        out = np.ones(self.n_nodes)
        off = self.level_offsets
        for t in range(self.depth):
            lo, hi = off[t], off[t + 1]
            out[off[t + 1]:off[t + 2]] = (out[lo:hi, None] * per_branch[lo:hi]).ravel()
        return out

    # -- indexing --------------------------------------------------------
    def index(self, node: NodeId | int) -> int:
        if isinstance(node, (int, np.integer)):
            if not 0 <= node < self.n_nodes:
                raise DomainError(f"node index {node} outside tree")
            return int(node)
        if node.time_index > self.depth or any(not 0 <= k < self.branching for k in node.path):
            raise DomainError(f"invalid node path {node.path}")
        v = 0
        for k in node.path:
            v = self.branching * v + 1 + k
        return v

    def node_id(self, v: int) -> NodeId:
        path = []
        while v > 0:
            path.append(int(self.branch[v]))
            v = int(self.parent[v])
        return NodeId(tuple(reversed(path)))

    def is_terminal(self, node: NodeId | int) -> bool:
        return self.index(node) >= self.n_internal

    def level_slice(self, t: int) -> slice:
        return slice(self.level_offsets[t], self.level_offsets[t + 1])

    @property
    def leaves(self) -> slice:
        return self.level_slice(self.depth)

    def subtree_depth(self, v: int) -> int:
        return self.depth - int(self.level[v])

    def __repr__(self) -> str:
        return (f"TreeModel(depth={self.depth}, branching={self.branching}, "
                f"dt={self.dt}, sigma={self.sigma})")


@dataclass(frozen=True)
class Measure:
    """Branch probabilities per internal node, plus the density w.r.t. P."""

    tree: TreeModel = field(repr=False)
    probs: np.ndarray
    density: np.ndarray
    tag: str = "P"

    def expect_next(self, values: np.ndarray) -> np.ndarray:
        """Conditional expectation of a node process one step ahead, per internal node."""
        values = np.asarray(values, dtype=float)
        return np.einsum("ij,ij->i", self.probs, values[self.tree.children])

    def expect_branches(self, per_branch: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ij->i", self.probs, per_branch)

    def accumulate(self, inc: np.ndarray) -> np.ndarray:
        """``R(v) = inc(v) + E[R(child) | v]`` with ``R = 0`` on leaves."""
        t = self.tree
        return kernels.backward_accumulate(
            self.probs, np.ascontiguousarray(inc, dtype=float), t.branching, t.depth)


class AdaptedProcess:
    """One real value per node of a tree."""

    __slots__ = ("tree", "values")

    def __init__(self, tree: TreeModel, values):
        arr = np.array(values, dtype=float)
        if arr.ndim == 0:
            arr = np.full(tree.n_nodes, float(arr))
        if arr.shape != (tree.n_nodes,):
            raise ContractError(f"expected {tree.n_nodes} node values, got shape {arr.shape}")
        self.tree = tree
        self.values = arr

    @classmethod
    def constant(cls, tree: TreeModel, c: float) -> "AdaptedProcess":
        return cls(tree, np.full(tree.n_nodes, float(c)))

    @classmethod
    def from_function(cls, tree: TreeModel, fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]):
        """Build from ``fn(t, m, w)`` evaluated on every node."""
        vals = np.broadcast_to(fn(tree.time, tree.m_value, tree.w_value), (tree.n_nodes,))
        return cls(tree, np.array(vals, dtype=float))

    @property
    def internal(self) -> np.ndarray:
        return self.values[: self.tree.n_internal]

    @property
    def leaf_values(self) -> np.ndarray:
        return self.values[self.tree.n_internal:]

    def at(self, node: NodeId | int) -> float:
        return float(self.values[self.tree.index(node)])

    def _coerce(self, other):
        return other.values if isinstance(other, AdaptedProcess) else other

    def __add__(self, other):
        return AdaptedProcess(self.tree, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return AdaptedProcess(self.tree, self.values - self._coerce(other))

    def __rsub__(self, other):
        return AdaptedProcess(self.tree, self._coerce(other) - self.values)

    def __mul__(self, other):
        return AdaptedProcess(self.tree, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return AdaptedProcess(self.tree, -self.values)

    def __repr__(self) -> str:
        return f"AdaptedProcess(n={self.values.size}, max|.|={np.abs(self.values).max():.4g})"


@dataclass(frozen=True)
class MartingaleParts:
    """Decomposition of the one-step martingale increments of a process.

    ``increments[v, k]`` is the centred increment on branch ``k`` of node
    ``v``; ``z`` is the integrand on the (centred) reference martingale and
    ``orth`` the orthogonal remainder. Brackets are predictable conditional
    second moments under ``measure``.
    """

    z: np.ndarray
    orth: np.ndarray
    increments: np.ndarray
    d_n: np.ndarray
    d_nperp: np.ndarray
    d_mn: np.ndarray
    measure_tag: str = "P"


def _as_values(values) -> np.ndarray:
    return values.values if isinstance(values, AdaptedProcess) else np.asarray(values, dtype=float)


def decompose(model: TreeModel, values, measure: Measure | None = None) -> MartingaleParts:
    """Martingale decomposition of a whole node process onto the reference martingale."""
    measure = model.P if measure is None else measure
    y = _as_values(values)
    kids = y[model.children]
    x = kids - measure.expect_branches(kids)[:, None]
    return _split(model, x, measure.probs, measure.tag)


def _split(model: TreeModel, x: np.ndarray, probs: np.ndarray, tag: str) -> MartingaleParts:
    dm = model.dm[None, :]
    mean_m = probs @ model.dm
    dmt = dm - mean_m[:, None]
    var_m = np.einsum("ij,ij->i", probs, dmt * dmt)
    d_mn = np.einsum("ij,ij->i", probs, dmt * x)
    z = d_mn / var_m
    orth = x - z[:, None] * dmt
    if model.branching == 2:
        orth = np.zeros_like(orth)
    d_n = np.einsum("ij,ij->i", probs, x * x)
    d_nperp = np.einsum("ij,ij->i", probs, orth * orth)
    return MartingaleParts(z, orth, x, d_n, d_nperp, d_mn, tag)


def _child_values(next_values, node: int, model: TreeModel) -> np.ndarray:
    if isinstance(next_values, AdaptedProcess):
        return next_values.values[model.children[node]]
    arr = np.asarray(next_values, dtype=float)
    if arr.shape != (model.branching,):
        raise ContractError(f"expected {model.branching} child values")
    return arr


def conditional_expectation(proc_next, node: NodeId | int, measure: Measure) -> float:
    """Probability-weighted average of the children of a non-terminal node."""
    model = measure.tree
    v = model.index(node)
    if v >= model.n_internal:
        raise DomainError(f"node {model.node_id(v)} is terminal")
    return float(measure.probs[v] @ _child_values(proc_next, v, model))


def martingale_decompose(next_values, node: NodeId | int, model: TreeModel,
                         measure: Measure | None = None) -> MartingaleParts:
    """Decomposition at a single node; arrays in the result have one row."""
    measure = model.P if measure is None else measure
    v = model.index(node)
    if v >= model.n_internal:
        raise DomainError(f"node {model.node_id(v)} is terminal")
    kids = _child_values(next_values, v, model)
    p = measure.probs[v:v + 1]
    x = (kids - p[0] @ kids)[None, :]
    return _split(model, x, p, measure.tag)


def predictable_bracket(inc_a, inc_b, node: NodeId | int, measure: Measure) -> float:
    model = measure.tree
    v = model.index(node)
    if v >= model.n_internal:
        raise DomainError(f"node {model.node_id(v)} is terminal")
    a = np.asarray(inc_a, dtype=float)
    b = np.asarray(inc_b, dtype=float)
    p = measure.probs[v]
    for name, inc in (("A", a), ("B", b)):
        mean = p @ inc
        if abs(mean) > MEAN_TOL * max(1.0, np.abs(inc).max()):
            raise ContractError(f"increment family {name} has conditional mean {mean:.3e}")
    return float(p @ (a * b))


def girsanov(model: TreeModel, measure_p: Measure, kernel_increments: np.ndarray,
             tag: str = "Q") -> Measure:
    """Discrete change of measure ``q_k = p_k (1 + dL_k)``."""
    dl = np.asarray(kernel_increments, dtype=float)
    if dl.shape != (model.n_internal, model.branching):
        raise ContractError("kernel increments must have shape (n_internal, branching)")
    factor = 1.0 + dl
    bad = np.argwhere(factor <= 0.0)
    if bad.size:
        v, k = bad[0]
        raise StepSizeError(
            f"kernel too large for step size: 1 + dL = {factor[v, k]:.3g} on branch {k} "
            f"of node {model.node_id(int(v))}; reduce dt")
    mean = np.einsum("ij,ij->i", measure_p.probs, dl)
    worst = np.abs(mean).max()
    if worst > 1e-10 * max(1.0, np.abs(dl).max()):
        raise ContractError(f"kernel increments are not P-centred (max mean {worst:.3e})")
    q = measure_p.probs * factor
    q /= q.sum(axis=1, keepdims=True)
    density = model.path_product(q / measure_p.probs) * measure_p.density
    return Measure(model, _readonly(np.ascontiguousarray(q)), _readonly(density), tag)


def integrating_factor(beta, model: TreeModel, scheme: str = "exp") -> AdaptedProcess:
    """Running product of per-step factors along each path, equal to 1 at the root.

    ``scheme="exp"`` uses ``exp(beta*dt)``; ``scheme="implicit"`` uses
    ``1/(1 - beta*dt)``, which matches the implicit treatment of the
    y-argument in the discrete scheme exactly.
    """
    b_int = _as_values(beta)[: model.n_internal]
    if scheme == "exp":
        step = np.exp(b_int * model.dt)
    elif scheme == "implicit":
        denom = 1.0 - b_int * model.dt
        if np.any(denom <= 0):
            v = int(np.argmin(denom))
            raise StepSizeError(f"beta*dt >= 1 at node {model.node_id(v)}; reduce dt")
        step = 1.0 / denom
    else:
        raise ParameterError(f"unknown integrating-factor scheme {scheme!r}")
    per_branch = np.broadcast_to(step[:, None], (model.n_internal, model.branching))
    return AdaptedProcess(model, model.path_product(per_branch))


def build_tree(depth: int, branching: int = 2, dt: float = 1.0, sigma: float = 1.0,
               base_probabilities: Sequence[float] | None = None) -> TreeModel:
    return TreeModel(depth, branching, dt, sigma, base_probabilities)
