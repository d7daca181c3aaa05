"""Two-stage problem given by an explicit cost table.

The first stage picks exactly one of ``K`` options (one-hot binaries, cost
``f[k]``); the second-stage cost of option ``k`` in scenario ``s`` is
``table[k][s]``. Optional heuristic tables replace the default solver run,
which makes strategy behaviour fully scriptable in tests.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..engine import HeuristicResult, MasterModel, TwoStageProblem
from ..mip.model import Assignment, LinearExpr, Model


class TabulatedProblem(TwoStageProblem):
    def __init__(self, table, f=None, heuristic_ub=None, heuristic_lb=None, hint=None, stepped: bool = False):
        self.table = np.atleast_2d(np.asarray(table, dtype=float))
        K, n = self.table.shape
        self.f = np.zeros(K) if f is None else np.asarray(f, dtype=float)
        self.heuristic_ub = None if heuristic_ub is None else np.atleast_2d(np.asarray(heuristic_ub, dtype=float))
        self.heuristic_lb = None if heuristic_lb is None else np.atleast_2d(np.asarray(heuristic_lb, dtype=float))
        self.hint = hint
        # stepped: integer second stage whose proof needs branching (integral tables only)
        self.stepped = stepped
        if stepped and not np.all(self.table == np.round(self.table)):
            raise ValueError("stepped second stages need an integral table")

    def scenarios(self) -> list[int]:
        return list(range(self.table.shape[1]))

    def option(self, x: Assignment) -> int:
        return int(np.argmax(np.asarray(x)))

    def build_master(self, D: Sequence[int]) -> MasterModel:
        m = Model("tabulated_master")
        xs = [m.add_var(f"x_{k}", "binary") for k in range(len(self.f))]
        z = m.add_var("z", "continuous", 0.0)
        m.add_constr({x: 1.0 for x in xs}, "=", 1.0, "choose_one")
        for s in sorted(D):
            m.add_constr(LinearExpr({z: 1.0}) - LinearExpr({x: self.table[k, s] for k, x in enumerate(xs)}),
                         ">=", 0.0, f"epi_{s}")
        f_expr = LinearExpr({x: self.f[k] for k, x in enumerate(xs)})
        m.set_objective(f_expr + LinearExpr({z: 1.0}))
        return MasterModel(m, xs, z, f_expr)

    def build_second_stage(self, x: Assignment, s: int) -> Model:
        q = self.table[self.option(x), s]
        m = Model(f"tabulated_{s}")
        if self.stepped:
            y = m.add_var("y", "integer", 0.0, q + 1.0)
            m.add_constr({y: 2.0}, ">=", 2.0 * q - 1.0, "half_gap")
        else:
            y = m.add_var("y", "continuous", q)
        m.set_objective({y: 1.0})
        return m

    def first_stage_cost(self, x: Assignment) -> float:
        return float(self.f @ np.asarray(x, dtype=float))

    def init_hint(self):
        return self.hint

    def heuristic(self, x, s, budget, *, cutoff=None, clock=None, backend="embedded") -> HeuristicResult:
        if self.heuristic_ub is None:
            return super().heuristic(x, s, budget, cutoff=cutoff, clock=clock, backend=backend)
        k = self.option(x)
        ub = float(self.heuristic_ub[k, s])
        lb = 0.0 if self.heuristic_lb is None else float(self.heuristic_lb[k, s])
        return HeuristicResult(ub, lb, None, ub == lb and ub < math.inf)

    def q(self, x: Assignment, s: int) -> float:
        return float(self.table[self.option(x), s])

    def optimum(self) -> float:
        return float(np.min(self.f + self.table.max(axis=1)))
