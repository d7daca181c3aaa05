"""Exhaustive oracle: enumerate every integer point, solve the continuous rest exactly.

Independent of the branch-and-bound code path: it uses the dense Bland's-rule
simplex from :mod:`.simplex` and never touches HiGHS.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..mip.model import Model, Sense
from .simplex import solve_lp


class LatticeTooLargeError(ValueError):
    pass


@dataclass
class BruteResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    opt: float
    argmin: np.ndarray | None


def lattice_size(m: Model) -> int:
    size = 1
    for v in m.vars:
        if v.is_integer:
            if math.isinf(v.lower) or math.isinf(v.upper):
                raise LatticeTooLargeError(f"integer variable {v.name!r} is unbounded")
            size *= max(0, math.floor(v.upper + 1e-9) - math.ceil(v.lower - 1e-9) + 1)
    return size


def brute_force_solve(m: Model, max_points: int = 1_000_000) -> BruteResult:
    m.validate()
    size = lattice_size(m)
    if size > max_points:
        raise LatticeTooLargeError(f"lattice has {size} points, limit is {max_points}")
    arr = m.arrays()
    ints = np.flatnonzero(arr.is_int)
    conts = np.flatnonzero(~arr.is_int)
    A = arr.matrix.toarray()
    senses = [c.sense for c in m.constraints]
    rhs = np.array([c.rhs for c in m.constraints], dtype=float)

    # rows without continuous variables are checked before any LP is solved
    pure = np.flatnonzero(~np.any(A[:, conts] != 0, axis=1)) if len(conts) else np.arange(len(rhs))
    mixed = np.setdiff1d(np.arange(len(rhs)), pure)
    A_int = A[:, ints]
    A_cont = A[np.ix_(mixed, conts)]
    mixed_senses = [senses[i].value for i in mixed]
    tol = 1e-9

    ranges = [range(math.ceil(arr.col_lo[j] - 1e-9), math.floor(arr.col_hi[j] + 1e-9) + 1) for j in ints]
    best = BruteResult("infeasible", math.inf, None)
    for point in itertools.product(*ranges):
        y = np.array(point, dtype=float)
        act = A_int @ y if len(ints) else np.zeros(len(rhs))
        ok = True
        for i in pure:
            s = senses[i]
            if (s is Sense.LE and act[i] > rhs[i] + tol) or (s is Sense.GE and act[i] < rhs[i] - tol) \
                    or (s is Sense.EQ and abs(act[i] - rhs[i]) > tol):
                ok = False
                break
        if not ok:
            continue
        int_cost = float(arr.cost[ints] @ y) + arr.cost_constant
        x = np.zeros(m.num_vars)
        x[ints] = y
        if len(conts):
            lp = solve_lp(arr.cost[conts], A_cont, mixed_senses, rhs[mixed] - act[mixed],
                          arr.col_lo[conts], arr.col_hi[conts])
            if lp.status == "infeasible":
                continue
            if lp.status == "unbounded":
                return BruteResult("unbounded", -math.inf, None)
            x[conts] = lp.x
            value = int_cost + lp.objective
        else:
            value = int_cost
        if value < best.opt - 1e-9:
            best = BruteResult("optimal", value, x)
    return best
