"""In-process HiGHS MIP backend behind the session contract.

HiGHS cannot resume a stopped branch-and-bound, so every :meth:`step` is a
fresh bounded run warm-started with the best known solution; the session
keeps the best bounds seen across runs. Under a work clock the step budget
becomes a node limit, which keeps runs reproducible.
"""
from __future__ import annotations

import math

import highspy
import numpy as np

from ..mip.model import Assignment, Model, check_feasible, evaluate
from .clock import DEFAULT_CLOCK, WorkClock
from .session import (
    IMPROVEMENT_EPS, EventKind, SessionState, SolveEvent, SolveParams, SolverError, UnboundedModelError,
    gap_closed, trivial_lower_bound,
)

_STATUS = highspy.HighsModelStatus
_ERRORS = {_STATUS.kLoadError, _STATUS.kModelError, _STATUS.kPresolveError, _STATUS.kSolveError,
           _STATUS.kPostsolveError}


class HighsSession:
    def __init__(self, model: Model, params: SolveParams | None = None, start: Assignment | None = None):
        self.model = model
        self.params = params or SolveParams()
        self.clock = self.params.clock or DEFAULT_CLOCK
        self.ub = math.inf
        self.lb = trivial_lower_bound(model)
        self.incumbent: np.ndarray | None = None
        self.elapsed = 0.0
        self.nodes = 0
        self.state = SessionState.FRESH
        self._terminal: SolveEvent | None = None
        self._arr = model.arrays()
        self._highs = self._build()
        if start is not None:
            self.offer(start)

    def _build(self) -> highspy.Highs:
        arr = self._arr
        h = highspy.Highs()
        for key, value in (("output_flag", False), ("threads", 1), ("random_seed", int(self.params.seed)),
                           ("mip_rel_gap", float(self.params.target_gap)), ("mip_abs_gap", 1e-9)):
            h.setOptionValue(key, value)
        lp = highspy.HighsLp()
        lp.num_col_ = len(arr.cost)
        lp.num_row_ = arr.matrix.shape[0]
        lp.col_cost_ = arr.cost
        lp.offset_ = arr.cost_constant
        lp.col_lower_ = arr.col_lo
        lp.col_upper_ = arr.col_hi
        lp.row_lower_ = arr.row_lo
        lp.row_upper_ = arr.row_hi
        csc = arr.matrix.tocsc()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = csc.indptr
        lp.a_matrix_.index_ = csc.indices
        lp.a_matrix_.value_ = csc.data
        lp.integrality_ = [highspy.HighsVarType.kInteger if f else highspy.HighsVarType.kContinuous
                           for f in arr.is_int]
        h.passModel(lp)
        return h

    @property
    def finished(self) -> bool:
        return self.state is SessionState.FINISHED

    def offer(self, values: Assignment) -> bool:
        values = np.asarray(values, dtype=float)
        if len(values) != self.model.num_vars or not check_feasible(self.model, values):
            return False
        values = values.copy()
        values[self._arr.is_int] = np.round(values[self._arr.is_int])
        obj = evaluate(self.model.objective, values)
        if obj < self.ub - IMPROVEMENT_EPS:
            self.ub, self.incumbent = obj, values
            return True
        return False

    def close(self) -> None:
        self._highs = None

    def _finish(self, kind: EventKind) -> SolveEvent:
        if kind is EventKind.OPTIMAL:
            self.lb = self.ub
        elif kind is EventKind.INFEASIBLE:
            self.ub = self.lb = math.inf
        self.state = SessionState.FINISHED
        self._terminal = SolveEvent(kind, self.lb if kind is EventKind.INFEASIBLE else self.ub)
        self.close()
        return self._terminal

    def step(self, budget: float = math.inf) -> SolveEvent:
        if not budget > 0:
            raise ValueError("budget must be positive")
        if self._terminal is not None:
            return self._terminal
        remaining = min(budget, self.params.time_limit - self.elapsed)
        if self.nodes >= self.params.node_limit or remaining <= 0:
            return self._finish(EventKind.TIME_LIMIT)
        h = self._highs
        work = isinstance(self.clock, WorkClock)
        if work:
            node_cap = max(1, int(remaining / self.clock.seconds_per_node))
            if self.params.node_limit < math.inf:
                node_cap = min(node_cap, int(self.params.node_limit - self.nodes))
            h.setOptionValue("mip_max_nodes", node_cap)
        else:
            h.setOptionValue("time_limit", float(remaining) if remaining < math.inf else math.inf)
        if self.incumbent is not None:
            sol = highspy.HighsSolution()
            sol.col_value = list(self.incumbent)
            sol.value_valid = True
            h.setSolution(sol)
        old_ub, old_lb = self.ub, self.lb
        t0 = self.clock.now()
        h.run()
        info = h.getInfo()
        run_nodes = max(1, int(info.mip_node_count))
        self.nodes += run_nodes
        self.clock.charge(run_nodes)
        self.elapsed += self.clock.now() - t0
        status = h.getModelStatus()
        if status == _STATUS.kInfeasible:
            return self._finish(EventKind.INFEASIBLE)
        if status in (_STATUS.kUnbounded, _STATUS.kUnboundedOrInfeasible):
            raise UnboundedModelError(f"{self.model.name or 'model'} is unbounded or infeasible")
        if status in _ERRORS:
            raise SolverError(f"unexpected HiGHS status {h.modelStatusToString(status)}")
        if info.primal_solution_status == 2:
            self.offer(np.array(h.getSolution().col_value))
        bound = info.mip_dual_bound
        if math.isfinite(bound) and bound > self.lb:
            self.lb = min(bound, self.ub)
        if status == _STATUS.kOptimal and self.incumbent is not None:
            if self.params.target_gap > 0 and self.ub - self.lb > 1e-7:
                return self._finish(EventKind.GAP_REACHED)
            return self._finish(EventKind.OPTIMAL)
        if self.params.target_gap > 0 and gap_closed(self.ub, self.lb, self.params.target_gap):
            return self._finish(EventKind.GAP_REACHED)
        if self.elapsed >= self.params.time_limit or self.nodes >= self.params.node_limit:
            return self._finish(EventKind.TIME_LIMIT)
        self.state = SessionState.PAUSED
        if self.ub < old_ub - IMPROVEMENT_EPS:
            return SolveEvent(EventKind.INCUMBENT_IMPROVED, self.ub)
        if self.lb > old_lb + IMPROVEMENT_EPS:
            return SolveEvent(EventKind.BOUND_IMPROVED, self.lb)
        return SolveEvent(EventKind.TIME_LIMIT, self.ub)
