"""Reflected BSDEs with quadratic drivers on finite trees."""

import logging

from .analysis import (
    apriori_bmo_bound, check_comparison, check_special_comparison, stability_experiment,
)
from .driver import Constants, Driver, DriverSpec, RBSDEData
from .errors import (
    ContractError, ConvergenceError, DomainError, DriverError, DriverSyntaxError, GateError,
    InfeasibleError, OracleRefusal, OrderingError, ParameterError, RBSDEError, StepSizeError,
)
from .growth import Growth
from .kernels import BACKEND
from .lattice import AdaptedProcess, Measure, NodeId, TreeModel, build_tree, decompose, girsanov
from .snell import Solution, snell_oracle, solve_underlying
from .solver import (
    SmallnessBudget, picard_solve, solve_backward, solve_full, solve_monotone, solve_superlinear,
)

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "AdaptedProcess", "BACKEND", "Constants", "ContractError", "ConvergenceError", "DomainError",
    "Driver", "DriverError", "DriverSpec", "DriverSyntaxError", "GateError", "Growth",
    "InfeasibleError", "Measure", "NodeId", "OracleRefusal", "OrderingError", "ParameterError",
    "RBSDEData", "RBSDEError", "SmallnessBudget", "Solution", "StepSizeError", "TreeModel",
    "apriori_bmo_bound", "build_tree", "check_comparison", "check_special_comparison", "decompose",
    "girsanov", "picard_solve", "snell_oracle", "solve_backward", "solve_full", "solve_monotone",
    "solve_superlinear", "solve_underlying", "stability_experiment",
]
