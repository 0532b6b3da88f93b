"""Backend selection for the backward sweeps.

The compiled extension is used when it was built; otherwise the numpy
implementation is used. ``RBSDE_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("RBSDE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

snell_sweep = _impl.snell_sweep
backward_accumulate = _impl.backward_accumulate
path_max = _impl.path_max

__all__ = ["BACKEND", "snell_sweep", "backward_accumulate", "path_max"]
