"""Small dense SDP engine: LMI modelling layer plus a batched interior-point solver."""
from .ipm import IpmOptions
from .problem import Affine, LmiProblem, ModelError, Variable, block, compile_problem
from .solver import (FEAS_TOL, GAP_TOL, FeasibilityResult, SdpSolution, SolverError,
                     check_feasible, max_violation, solve)

__all__ = ["Affine", "LmiProblem", "ModelError", "Variable", "block",
           "compile_problem", "IpmOptions", "FEAS_TOL", "GAP_TOL",
           "FeasibilityResult", "SdpSolution", "SolverError", "check_feasible",
           "max_violation", "solve"]
