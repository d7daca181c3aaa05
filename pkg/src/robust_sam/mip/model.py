"""Mixed-integer program representation.

A :class:`Model` is always a minimization problem over variables with dense
integer ids ``0..n-1``. Expressions are kept as sorted ``{var_id: coef}`` maps
so that evaluation order (and therefore floating point results) is fixed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
import scipy.sparse as sp

INF = math.inf


class StructuralError(ValueError):
    """Raised when a model or expression refers to unknown variables or is malformed."""


class Domain(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    INTEGER = "integer"


class Sense(str, Enum):
    LE = "<="
    EQ = "="
    GE = ">="

    @classmethod
    def parse(cls, value: Union["Sense", str]) -> "Sense":
        if isinstance(value, Sense):
            return value
        aliases = {"<=": cls.LE, "=<": cls.LE, "==": cls.EQ, "=": cls.EQ, ">=": cls.GE, "=>": cls.GE}
        try:
            return aliases[value]
        except KeyError:
            raise ValueError(f"unknown constraint sense {value!r}") from None


@dataclass(frozen=True)
class VarSpec:
    id: int
    name: str
    domain: Domain = Domain.CONTINUOUS
    lower: float = 0.0
    upper: float = INF

    def __post_init__(self):
        if self.domain is Domain.BINARY and (self.lower != 0.0 or self.upper != 1.0):
            raise StructuralError(f"binary variable {self.name!r} must have bounds [0, 1]")
        if self.lower > self.upper:
            raise StructuralError(f"variable {self.name!r} has lower > upper ({self.lower} > {self.upper})")

    @property
    def is_integer(self) -> bool:
        return self.domain is not Domain.CONTINUOUS


TermsLike = Union["LinearExpr", Mapping[int, float], Iterable[tuple[float, int]]]


class LinearExpr:
    """Affine expression ``sum(coef * x[id]) + constant``.

    Terms are normalized on construction: duplicate ids are merged, zero
    coefficients dropped and ids sorted ascending.
    """

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Mapping[int, float] | None = None, constant: float = 0.0):
        merged = {}
        if terms:
            for var, coef in terms.items():
                var = int(var)
                if var < 0:
                    raise StructuralError(f"negative variable id {var}")
                merged[var] = merged.get(var, 0.0) + float(coef)
        self.terms = {v: merged[v] for v in sorted(merged) if merged[v] != 0.0}
        self.constant = float(constant)

    @classmethod
    def of(cls, value: TermsLike | float | int) -> "LinearExpr":
        """Coerce a number, mapping, ``(coef, var)`` pairs or expression."""
        if isinstance(value, LinearExpr):
            return value
        if isinstance(value, (int, float, np.floating, np.integer)):
            return cls(constant=float(value))
        if isinstance(value, Mapping):
            return cls(value)
        merged: dict[int, float] = {}
        for coef, var in value:
            merged[int(var)] = merged.get(int(var), 0.0) + float(coef)
        return cls(merged)

    def __add__(self, other):
        other = LinearExpr.of(other)
        terms = dict(self.terms)
        for v, c in other.terms.items():
            terms[v] = terms.get(v, 0.0) + c
        return LinearExpr(terms, self.constant + other.constant)

    __radd__ = __add__

    def __neg__(self):
        return LinearExpr({v: -c for v, c in self.terms.items()}, -self.constant)

    def __sub__(self, other):
        return self + (-LinearExpr.of(other))

    def __rsub__(self, other):
        return LinearExpr.of(other) + (-self)

    def __mul__(self, scalar):
        if isinstance(scalar, LinearExpr):
            raise StructuralError("only linear expressions are supported")
        s = float(scalar)
        return LinearExpr({v: c * s for v, c in self.terms.items()}, self.constant * s)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, LinearExpr):
            return NotImplemented
        return self.terms == other.terms and self.constant == other.constant

    def __hash__(self):
        return hash((tuple(self.terms.items()), self.constant))

    def __repr__(self):
        parts = [f"{c:+g}*x{v}" for v, c in self.terms.items()]
        if self.constant or not parts:
            parts.append(f"{self.constant:+g}")
        return "LinearExpr(" + " ".join(parts) + ")"


@dataclass(frozen=True)
class Constraint:
    """``expr (sense) rhs`` with the expression constant folded into ``rhs``."""

    expr: LinearExpr
    sense: Sense
    rhs: float
    name: str = ""

    @classmethod
    def make(cls, expr: TermsLike, sense, rhs: float, name: str = "") -> "Constraint":
        expr = LinearExpr.of(expr)
        folded = LinearExpr(expr.terms, 0.0)
        return cls(folded, Sense.parse(sense), float(rhs) - expr.constant, name)


Assignment = np.ndarray


@dataclass
class Model:
    """A minimization MIP. Build with :meth:`add_var` / :meth:`add_constr`."""

    name: str = ""
    vars: list[VarSpec] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: LinearExpr = field(default_factory=LinearExpr)

    def add_var(self, name: str = "", domain: Domain | str = Domain.CONTINUOUS,
                lower: float = 0.0, upper: float = INF) -> int:
        domain = Domain(domain)
        if domain is Domain.BINARY:
            if (lower, upper) == (0.0, INF):
                lower, upper = 0.0, 1.0
            elif (lower, upper) != (0.0, 1.0):
                # a binary with tightened bounds is stored as a bounded integer
                domain = Domain.INTEGER
        vid = len(self.vars)
        self.vars.append(VarSpec(vid, name or f"x{vid}", domain, float(lower), float(upper)))
        return vid

    def add_constr(self, expr: TermsLike, sense, rhs: float = 0.0, name: str = "") -> Constraint:
        con = Constraint.make(expr, sense, rhs, name or f"c{len(self.constraints)}")
        self.constraints.append(con)
        return con

    def set_objective(self, expr: TermsLike | float) -> None:
        self.objective = LinearExpr.of(expr)

    @property
    def num_vars(self) -> int:
        return len(self.vars)

    def var_index(self) -> dict[str, int]:
        return {v.name: v.id for v in self.vars}

    def validate(self) -> None:
        n = len(self.vars)
        if n == 0:
            raise StructuralError("model has no variables")
        for i, v in enumerate(self.vars):
            if v.id != i:
                raise StructuralError(f"variable ids must be dense, found {v.id} at position {i}")
        for con in self.constraints:
            if con.expr.constant != 0.0:
                raise StructuralError(f"constraint {con.name!r} has an unfolded constant")
            for var in con.expr.terms:
                if var >= n:
                    raise StructuralError(f"constraint {con.name!r} references unknown variable {var}")
        for var in self.objective.terms:
            if var >= n:
                raise StructuralError(f"objective references unknown variable {var}")

    def arrays(self) -> "ModelArrays":
        self.validate()
        return ModelArrays.from_model(self)


@dataclass(frozen=True)
class ModelArrays:
    """Dense/sparse numeric view of a model, rows as ``row_lo <= A x <= row_hi``."""

    cost: np.ndarray
    cost_constant: float
    matrix: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray
    is_int: np.ndarray

    @classmethod
    def from_model(cls, m: Model) -> "ModelArrays":
        n = m.num_vars
        cost = np.zeros(n)
        for v, c in m.objective.terms.items():
            cost[v] = c
        rows, cols, vals = [], [], []
        row_lo = np.empty(len(m.constraints))
        row_hi = np.empty(len(m.constraints))
        for r, con in enumerate(m.constraints):
            for v, c in con.expr.terms.items():
                rows.append(r)
                cols.append(v)
                vals.append(c)
            row_lo[r] = -INF if con.sense is Sense.LE else con.rhs
            row_hi[r] = INF if con.sense is Sense.GE else con.rhs
        matrix = sp.csr_matrix((vals, (rows, cols)), shape=(len(m.constraints), n))
        col_lo = np.array([v.lower for v in m.vars], dtype=float)
        col_hi = np.array([v.upper for v in m.vars], dtype=float)
        is_int = np.array([v.is_integer for v in m.vars], dtype=bool)
        return cls(cost, m.objective.constant, matrix, row_lo, row_hi, col_lo, col_hi, is_int)


def evaluate(expr: LinearExpr, a: Sequence[float]) -> float:
    """Value of ``expr`` at ``a``, summed in ascending variable id order."""
    n = len(a)
    total = 0.0
    for var, coef in expr.terms.items():
        if var >= n:
            raise StructuralError(f"assignment has no value for variable {var}")
        total += coef * float(a[var])
    return total + expr.constant


@dataclass(frozen=True)
class Violation:
    kind: str  # "constraint", "bound" or "integrality"
    name: str
    amount: float


@dataclass
class FeasibilityReport:
    feasible: bool
    violations: list[Violation]

    def __bool__(self) -> bool:
        return self.feasible


def check_feasible(m: Model, a: Sequence[float], tol: float = 1e-6,
                   int_tol: float | None = None) -> FeasibilityReport:
    """Check constraints, bounds and integrality of ``a`` against ``m``.

    All checks use absolute tolerances; ``int_tol`` defaults to ``tol``.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    int_tol = tol if int_tol is None else int_tol
    if len(a) != m.num_vars:
        raise StructuralError(f"assignment length {len(a)} != {m.num_vars} variables")
    out: list[Violation] = []
    for v in m.vars:
        x = float(a[v.id])
        if x < v.lower - tol:
            out.append(Violation("bound", v.name, v.lower - x))
        elif x > v.upper + tol:
            out.append(Violation("bound", v.name, x - v.upper))
        if v.is_integer:
            frac = abs(x - round(x))
            if frac > int_tol:
                out.append(Violation("integrality", v.name, frac))
    for con in m.constraints:
        lhs = evaluate(con.expr, a)
        if con.sense is Sense.LE:
            excess = lhs - con.rhs
        elif con.sense is Sense.GE:
            excess = con.rhs - lhs
        else:
            excess = abs(lhs - con.rhs)
        if excess > tol:
            out.append(Violation("constraint", con.name, excess))
    return FeasibilityReport(not out, out)
