"""Exception hierarchy shared by every module."""

from __future__ import annotations


class RBSDEError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(RBSDEError, ValueError):
    """Invalid construction parameter (non-positive dt, bad branching, ...)."""


class DomainError(RBSDEError, ValueError):
    """Operation invoked outside its domain, e.g. on a terminal node."""


class ContractError(RBSDEError, ValueError):
    """An input violates an operation's stated precondition."""


class DriverError(RBSDEError):
    """Driver expression evaluation failed."""

    def __init__(self, message: str, node: int | None = None):
        if node is not None:
            message = f"{message} (at node {node})"
        super().__init__(message)
        self.node = node


class DriverSyntaxError(RBSDEError):
    def __init__(self, message: str, line: int, column: int, token_index: int):
        super().__init__(f"{message} at line {line}, column {column} (token {token_index})")
        self.line = line
        self.column = column
        self.token_index = token_index


class InfeasibleError(RBSDEError):
    """Terminal condition below the obstacle at some leaf."""


class StepSizeError(RBSDEError):
    """A discrete kernel is too large for the time step; dt must shrink."""


class GateError(RBSDEError):
    """Data too large for the smallness gate of a fixed-point stage."""

    def __init__(self, message: str, suggested_n: int | None = None):
        super().__init__(message)
        self.suggested_n = suggested_n


class ConvergenceError(RBSDEError):
    """Picard iteration exceeded its iteration budget."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class OrderingError(RBSDEError):
    """Paired data are not ordered as a comparison check requires."""


class OracleRefusal(RBSDEError):
    """Stopping-time enumeration would be too large."""
