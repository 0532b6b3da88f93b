"""Pure numpy backward sweeps over a breadth-first b-ary tree.

Node ``v`` has children ``b*v + 1 .. b*v + b``; level ``t`` occupies the
flat slice ``[(b**t - 1)//(b - 1), (b**(t+1) - 1)//(b - 1))``.
"""

from __future__ import annotations

import numpy as np


def _offsets(b: int, depth: int) -> list[int]:
    return [(b**t - 1) // (b - 1) for t in range(depth + 2)]


def snell_sweep(probs, dv, xi, lower, b: int, depth: int):
    off = _offsets(b, depth)
    n_nodes = off[depth + 1]
    y = np.empty(n_nodes)
    y[off[depth]:] = xi
    ytilde = np.empty(off[depth])
    for t in range(depth - 1, -1, -1):
        lo, hi = off[t], off[t + 1]
        kids = y[off[t + 1]:off[t + 2]].reshape(-1, b)
        cont = np.einsum("ij,ij->i", probs[lo:hi], kids) + dv[lo:hi]
        ytilde[lo:hi] = cont
        y[lo:hi] = np.maximum(cont, lower[lo:hi])
    dk = y[: off[depth]] - ytilde
    return y, ytilde, dk


def backward_accumulate(probs, inc, b: int, depth: int):
    off = _offsets(b, depth)
    out = np.zeros(off[depth + 1])
    for t in range(depth - 1, -1, -1):
        lo, hi = off[t], off[t + 1]
        kids = out[off[t + 1]:off[t + 2]].reshape(-1, b)
        out[lo:hi] = inc[lo:hi] + np.einsum("ij,ij->i", probs[lo:hi], kids)
    return out


def path_max(inc, b: int, depth: int):
    off = _offsets(b, depth)
    out = np.zeros(off[depth + 1])
    for t in range(depth - 1, -1, -1):
        lo, hi = off[t], off[t + 1]
        kids = out[off[t + 1]:off[t + 2]].reshape(-1, b)
        out[lo:hi] = inc[lo:hi] + kids.max(axis=1)
    return out
