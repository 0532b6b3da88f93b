"""Machine-readable reports: canonical JSON envelopes and per-node CSV tables.

Schema ``qrbsde-report/1``::

    {"schema": "qrbsde-report/1", "command": ..., "status": "pass" | "fail",
     "seed": int, "scenario": {...}, "budget": {...} | null, "result": {...},
     "metadata": {...}}   # only with --stamp

Keys are sorted and floats are written with ``repr`` precision, so the same
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

REPORT_SCHEMA = "qrbsde-report/1"


def to_jsonable(obj):
    """Convert numpy values, dataclasses and non-finite floats to plain JSON types."""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def envelope(command: str, status: str, seed: int, result: dict, budget=None,
             scenario: dict | None = None, metadata: dict | None = None) -> dict:
    out = {"schema": REPORT_SCHEMA, "command": command, "status": status, "seed": int(seed),
           "budget": budget, "result": result, "scenario": scenario}
    if metadata:
        out["metadata"] = metadata
    return out


def write_atomic(path: str | Path, text: str) -> None:
    """Write via a temporary file in the target directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str | Path, obj) -> None:
    write_atomic(path, dumps(obj))


def node_table(model, columns: dict[str, np.ndarray]) -> str:
    """CSV with one row per node: index, path, time and the given columns.

    Columns shorter than ``n_nodes`` (per-internal-node quantities) are left
    blank on the leaves.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    writer.writerow(["node", "path", "t", *names])
    for v in range(model.n_nodes):
        row = [v, str(model.node_id(v)), repr(float(model.time[v]))]
        for name in names:
            col = columns[name]
            row.append(repr(float(col[v])) if v < len(col) else "")
        writer.writerow(row)
    return buf.getvalue()


def write_csv(path: str | Path, model, columns: dict[str, np.ndarray]) -> None:
    write_atomic(path, node_table(model, columns))
