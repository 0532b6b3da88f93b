"""Compare the compiled and numpy backward-sweep kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--json PATH]

Timings are the best of ``repeat`` runs.  Results of the two backends are
checked for agreement before timing.
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from qrbsde import _pykernels
from qrbsde.lattice import build_tree

try:
    from qrbsde import _ckernels
except ImportError:  # extension not built
    _ckernels = None

CASES = [(2, 8), (2, 12), (2, 16), (4, 4), (4, 6), (4, 8)]


def _inputs(b: int, depth: int, rng: np.random.Generator):
    model = build_tree(depth, b, 1.0 / depth)
    n_int = model.n_internal
    probs = np.ascontiguousarray(np.broadcast_to(model.P.probs[0], (n_int, b)))
    dv = rng.normal(0, 0.01, n_int)
    xi = rng.normal(0, 1, model.n_leaves)
    lower = rng.normal(-0.5, 0.5, model.n_nodes)
    lower[model.leaves] = np.minimum(lower[model.leaves], xi)
    inc = np.abs(rng.normal(0, 1, n_int))
    return model, probs, dv, xi, lower, inc


def _calls(mod, b, depth, probs, dv, xi, lower, inc):
    return {
        "snell_sweep": lambda: mod.snell_sweep(probs, dv, xi, lower, b, depth),
        "backward_accumulate": lambda: mod.backward_accumulate(probs, inc, b, depth),
        "path_max": lambda: mod.path_max(inc, b, depth),
    }


def _best(fn, repeat: int) -> float:
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def run(repeat: int = 5, seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    rows = []
    for b, depth in CASES:
        model, probs, dv, xi, lower, inc = _inputs(b, depth, rng)
        py = _calls(_pykernels, b, depth, probs, dv, xi, lower, inc)
        cy = _calls(_ckernels, b, depth, probs, dv, xi, lower, inc) if _ckernels else {}
        for name, fn in py.items():
            row = {"kernel": name, "branching": b, "depth": depth, "nodes": model.n_nodes,
                   "python_s": _best(fn, repeat)}
            if name in cy:
                ref, got = fn(), cy[name]()
                ref = ref if isinstance(ref, tuple) else (ref,)
                got = got if isinstance(got, tuple) else (got,)
                row["max_abs_diff"] = max(float(np.max(np.abs(np.asarray(a) - np.asarray(c))))
                                          for a, c in zip(ref, got))
                row["cython_s"] = _best(cy[name], repeat)
                row["speedup"] = row["python_s"] / row["cython_s"]
            rows.append(row)
    return rows


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", metavar="PATH")
    args = parser.parse_args()
    rows = run(args.repeat)
    head = f"{'kernel':<20s} {'b':>2s} {'depth':>5s} {'nodes':>9s} {'python':>11s} {'cython':>11s} {'speedup':>8s} {'diff':>9s}"
    print(head)
    for r in rows:
        cy = f"{r['cython_s'] * 1e6:9.1f}us" if "cython_s" in r else "      n/a"
        sp = f"{r['speedup']:7.1f}x" if "speedup" in r else "     n/a"
        diff = f"{r['max_abs_diff']:9.1e}" if "max_abs_diff" in r else "      n/a"
        print(f"{r['kernel']:<20s} {r['branching']:>2d} {r['depth']:>5d} {r['nodes']:>9d} "
              f"{r['python_s'] * 1e6:9.1f}us {cy} {sp} {diff}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
