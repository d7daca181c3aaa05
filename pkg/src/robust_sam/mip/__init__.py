from .gap import GapInconsistencyError, relative_gap
from .lpfile import write_lp
from .model import (
    INF,
    Assignment,
    Constraint,
    Domain,
    FeasibilityReport,
    LinearExpr,
    Model,
    ModelArrays,
    Sense,
    StructuralError,
    VarSpec,
    Violation,
    check_feasible,
    evaluate,
)

__all__ = [
    "INF",
    "Assignment",
    "Constraint",
    "Domain",
    "FeasibilityReport",
    "GapInconsistencyError",
    "LinearExpr",
    "Model",
    "ModelArrays",
    "Sense",
    "StructuralError",
    "VarSpec",
    "Violation",
    "check_feasible",
    "evaluate",
    "relative_gap",
    "write_lp",
]
