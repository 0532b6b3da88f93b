"""Catalog of monotone growth functions used for declared constants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

KINDS = ("constant", "linear", "exp", "superlinear")


@dataclass(frozen=True)
class Growth:
    """``constant``: c; ``linear``: c(1+|y|); ``exp``: c*exp(a|y|);
    ``superlinear``: c(1+|y|)log(1+|y|)."""

    kind: str = "constant"
    c: float = 1.0
    a: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown growth kind {self.kind!r}; expected one of {KINDS}")
        if self.c < 0 or self.a < 0:
            raise ParameterError("growth parameters must be non-negative")

    def __call__(self, y):
        ay = np.abs(y)
        if self.kind == "constant":
            return self.c + 0.0 * ay
        if self.kind == "linear":
            return self.c * (1.0 + ay)
        if self.kind == "exp":
            return self.c * np.exp(self.a * ay)
        return self.c * (1.0 + ay) * np.log1p(ay)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "c": self.c}
        if self.kind == "exp":
            out["a"] = self.a
        return out

    @classmethod
    def parse(cls, spec) -> "Growth":
        if isinstance(spec, Growth):
            return spec
        if isinstance(spec, (int, float)):
            return cls("constant", float(spec))
        if isinstance(spec, dict):
            return cls(spec.get("kind", "constant"), float(spec.get("c", 1.0)), float(spec.get("a", 1.0)))
        raise ParameterError(f"cannot read growth function from {spec!r}")
