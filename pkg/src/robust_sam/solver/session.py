"""Incremental branch-and-bound with pausable, event-driven solving.

A :class:`SolveSession` owns the whole search tree. :meth:`SolveSession.step`
processes nodes until something observable happens (a better incumbent, a
higher global lower bound, a terminal state, or the step budget running out)
and can be called again later to resume exactly where it stopped.

Node selection is best-bound (ties go to the deeper node, then to the older
node), branching picks the most fractional variable (lowest id on ties). Node
LP relaxations are solved with HiGHS' dual simplex, warm-started from the
previous node's basis.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum

import highspy
import numpy as np

from ..mip.gap import relative_gap
from ..mip.model import Assignment, Model, check_feasible, evaluate
from .clock import DEFAULT_CLOCK

IMPROVEMENT_EPS = 1e-9
INT_TOL = 1e-6
FEAS_TOL = 1e-6
PRUNE_TOL = 1e-7
BRANCHING_RULES = ("pseudocost", "most_fractional")
RELIABILITY = 8  # strong-branching samples before a pseudocost is trusted
STRONG_CANDIDATES = 32


class UnboundedModelError(RuntimeError):
    """The LP relaxation of a node is unbounded."""


class SolverError(RuntimeError):
    pass


class EventKind(str, Enum):
    INCUMBENT_IMPROVED = "IncumbentImproved"
    BOUND_IMPROVED = "BoundImproved"
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    TIME_LIMIT = "TimeLimitReached"
    GAP_REACHED = "GapReached"


TERMINAL = {EventKind.OPTIMAL, EventKind.INFEASIBLE, EventKind.GAP_REACHED}


@dataclass(frozen=True)
class SolveEvent:
    kind: EventKind
    value: float | None = None

    @property
    def terminal(self) -> bool:
        return self.kind in TERMINAL


@dataclass(frozen=True)
class SolveParams:
    """Stopping rules for a solve.

    ``node_limit`` exhaustion is reported as ``TimeLimitReached``. ``seed`` is
    forwarded to external solvers; the embedded solver is deterministic.
    """

    target_gap: float = 0.0
    time_limit: float = math.inf
    node_limit: float = math.inf
    seed: int = 0
    clock: object = field(default=None, compare=False)
    branching: str = "pseudocost"  # or "most_fractional"

    def __post_init__(self):
        if not 0.0 <= self.target_gap < 1.0:
            raise ValueError(f"target_gap must lie in [0, 1), got {self.target_gap}")
        if not self.time_limit > 0:
            raise ValueError(f"time_limit must be positive, got {self.time_limit}")
        if self.branching not in BRANCHING_RULES:
            raise ValueError(f"branching must be one of {BRANCHING_RULES}, got {self.branching!r}")


def gap_closed(ub: float, lb: float, target: float) -> bool:
    """True if ``(ub, lb)`` certify relative gap ``target`` for a non-negative objective."""
    if ub == math.inf or lb == -math.inf:
        return False
    if ub - lb <= PRUNE_TOL:
        return True
    if target <= 0 or lb < 0:
        return False
    return relative_gap(ub, lb) <= target


def trivial_lower_bound(m: Model) -> float:
    """0 when the objective is provably non-negative from the variable bounds, else -inf."""
    bound = m.objective.constant
    for var, coef in m.objective.terms.items():
        v = m.vars[var]
        edge = v.lower if coef > 0 else v.upper
        if math.isinf(edge):
            return -math.inf
        bound += coef * edge
    # tolerance absorbs cancellation between constants and fixed bounds
    return 0.0 if bound >= -1e-9 else -math.inf


class SessionState(str, Enum):
    FRESH = "fresh"
    PAUSED = "paused"
    FINISHED = "finished"


class SolveSession:
    def __init__(self, model: Model, params: SolveParams | None = None,
                 start: Assignment | None = None):
        self.model = model
        self.params = params or SolveParams()
        self.clock = self.params.clock or DEFAULT_CLOCK
        self._arr = model.arrays()
        self.ub = math.inf
        self.lb = trivial_lower_bound(model)
        self.incumbent: np.ndarray | None = None
        self.elapsed = 0.0
        self.nodes = 0
        self.state = SessionState.FRESH
        self._terminal: SolveEvent | None = None
        self._highs: highspy.Highs | None = None
        self._seq = 0
        self._pc = None

        arr = self._arr
        self._int_idx = np.flatnonzero(arr.is_int).astype(np.int32)
        lo = np.ceil(arr.col_lo[self._int_idx] - INT_TOL)
        hi = np.floor(arr.col_hi[self._int_idx] + INT_TOL)
        self._heap: list = []
        if np.all(lo <= hi):
            self._push(self.lb, 0, lo, hi)
        if start is not None:
            self.offer(start)

    # -- public -----------------------------------------------------------

    @property
    def gap(self) -> float:
        if self.ub == math.inf or self.lb < 0:
            return 1.0 if self.ub != self.lb else 0.0
        return relative_gap(self.ub, self.lb)

    @property
    def finished(self) -> bool:
        return self.state is SessionState.FINISHED

    def offer(self, values: Assignment) -> bool:
        """Try ``values`` as an incumbent; returns True if it improved ``ub``."""
        values = np.asarray(values, dtype=float)
        if len(values) != self.model.num_vars or not check_feasible(self.model, values, FEAS_TOL):
            return False
        rounded = values.copy()
        rounded[self._int_idx] = np.round(rounded[self._int_idx])
        obj = evaluate(self.model.objective, rounded)
        if obj < self.ub - IMPROVEMENT_EPS:
            self.ub, self.incumbent = obj, rounded
            return True
        return False

    def step(self, budget: float = math.inf) -> SolveEvent:
        """Advance the search until the next event; see module docstring."""
        if not budget > 0:
            raise ValueError("budget must be positive")
        if self._terminal is not None:
            return self._terminal
        start_time = self.clock.now()
        start_ub, start_lb = self.ub, self.lb
        first = True
        while True:
            event = self._check_stop()
            if event is not None:
                return event
            if not first and self.clock.now() - start_time >= budget:
                self.state = SessionState.PAUSED
                return SolveEvent(EventKind.TIME_LIMIT, self.ub)
            first = False
            t0 = self.clock.now()
            self._process_node()
            self.elapsed += self.clock.now() - t0
            if self.ub < start_ub - IMPROVEMENT_EPS or self.lb > start_lb + IMPROVEMENT_EPS:
                event = self._check_stop()
                if event is not None:
                    return event
                self.state = SessionState.PAUSED
                if self.ub < start_ub - IMPROVEMENT_EPS:
                    return SolveEvent(EventKind.INCUMBENT_IMPROVED, self.ub)
                return SolveEvent(EventKind.BOUND_IMPROVED, self.lb)

    def close(self) -> None:
        self._highs = None

    # -- internals --------------------------------------------------------

    def _push(self, bound: float, depth: int, lo: np.ndarray, hi: np.ndarray) -> None:
        heapq.heappush(self._heap, (bound, -depth, self._seq, lo, hi))
        self._seq += 1

    def _finish(self, kind: EventKind) -> SolveEvent:
        if kind is EventKind.OPTIMAL:
            self.lb = self.ub
        elif kind is EventKind.INFEASIBLE:
            self.ub = self.lb = math.inf
        self._heap.clear()
        self.state = SessionState.FINISHED
        value = self.lb if kind is EventKind.INFEASIBLE else self.ub
        self._terminal = SolveEvent(kind, value)
        self.close()
        return self._terminal

    def _check_stop(self) -> SolveEvent | None:
        while self._heap and self._heap[0][0] >= self.ub - PRUNE_TOL:
            heapq.heappop(self._heap)
        if not self._heap:
            return self._finish(EventKind.OPTIMAL if self.ub < math.inf else EventKind.INFEASIBLE)
        self.lb = max(self.lb, min(self._heap[0][0], self.ub))
        if self.params.target_gap > 0 and gap_closed(self.ub, self.lb, self.params.target_gap):
            return self._finish(EventKind.GAP_REACHED)
        if self.elapsed >= self.params.time_limit or self.nodes >= self.params.node_limit:
            self.state = SessionState.FINISHED
            self._terminal = SolveEvent(EventKind.TIME_LIMIT, self.ub)
            self.close()
            return self._terminal
        return None

    def _lp(self) -> highspy.Highs:
        if self._highs is None:
            arr = self._arr
            h = highspy.Highs()
            h.setOptionValue("output_flag", False)
            h.setOptionValue("presolve", "off")
            h.setOptionValue("threads", 1)
            lp = highspy.HighsLp()
            lp.num_col_ = len(arr.cost)
            lp.num_row_ = arr.matrix.shape[0]
            lp.col_cost_ = arr.cost
            lp.col_lower_ = arr.col_lo
            lp.col_upper_ = arr.col_hi
            lp.row_lower_ = arr.row_lo
            lp.row_upper_ = arr.row_hi
            csc = arr.matrix.tocsc()
            lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
            lp.a_matrix_.start_ = csc.indptr
            lp.a_matrix_.index_ = csc.indices
            lp.a_matrix_.value_ = csc.data
            h.passModel(lp)
            self._highs = h
        return self._highs

    def _solve_relaxation(self, lo: np.ndarray, hi: np.ndarray):
        h = self._lp()
        if len(self._int_idx):
            h.changeColsBounds(len(self._int_idx), self._int_idx, lo, hi)
        h.run()
        status = h.getModelStatus()
        if status == highspy.HighsModelStatus.kInfeasible:
            return None
        if status in (highspy.HighsModelStatus.kUnbounded,
                      highspy.HighsModelStatus.kUnboundedOrInfeasible):
            raise UnboundedModelError(f"LP relaxation of {self.model.name or 'model'} is unbounded")
        if status != highspy.HighsModelStatus.kOptimal:
            raise SolverError(f"unexpected LP status {status}")
        x = np.array(h.getSolution().col_value)
        return float(self._arr.cost @ x) + self._arr.cost_constant, x

    def _consistent(self, x: np.ndarray) -> bool:
        arr = self._arr
        act = arr.matrix @ x
        return bool(np.all(act >= arr.row_lo - FEAS_TOL) and np.all(act <= arr.row_hi + FEAS_TOL)
                    and np.all(x >= arr.col_lo - FEAS_TOL) and np.all(x <= arr.col_hi + FEAS_TOL))

    def _accept_integral(self, x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> None:
        x = x.copy()
        fixed = np.round(x[self._int_idx])
        x[self._int_idx] = fixed
        if not self._consistent(x):
            # re-derive the continuous part with the integers pinned
            relaxed = self._solve_relaxation(fixed, fixed)
            if relaxed is None:
                return
            x = relaxed[1]
            x[self._int_idx] = fixed
            if not self._consistent(x):
                return
        x += 0.0  # normalizes -0.0
        obj = float(self._arr.cost @ x) + self._arr.cost_constant
        if obj < self.ub - IMPROVEMENT_EPS:
            self.ub, self.incumbent = obj, x

    def _process_node(self) -> None:
        bound, neg_depth, _, lo, hi = heapq.heappop(self._heap)
        self.nodes += 1
        self.clock.charge(1)
        if bound >= self.ub - PRUNE_TOL:
            return
        relaxed = self._solve_relaxation(lo, hi)
        if relaxed is None:
            return
        obj, x = relaxed
        obj = max(obj, bound)
        if obj >= self.ub - PRUNE_TOL:
            return
        if not len(self._int_idx):
            self._accept_integral(x, lo, hi)
            return
        vals = x[self._int_idx]
        frac = vals - np.floor(vals)
        dist = np.minimum(frac, 1.0 - frac)
        fractional = np.flatnonzero(dist > INT_TOL)
        if not len(fractional):
            self._accept_integral(x, lo, hi)
            return
        depth = 1 - neg_depth
        if self.params.branching == "most_fractional":
            pick, child_bounds = int(np.argmax(dist)), (obj, obj)
        else:
            pick, child_bounds = self._pseudocost_pick(fractional, vals, frac, obj, lo, hi)
        down_hi = hi.copy()
        down_hi[pick] = math.floor(vals[pick])
        up_lo = lo.copy()
        up_lo[pick] = math.ceil(vals[pick])
        down_bound, up_bound = child_bounds
        if up_bound < self.ub - PRUNE_TOL:
            self._push(max(obj, up_bound), depth, up_lo, hi)
        if down_bound < self.ub - PRUNE_TOL:
            self._push(max(obj, down_bound), depth, lo, down_hi)

    def _child_objective(self, lo, hi, j, down: bool, value: float) -> float:
        lo, hi = lo.copy(), hi.copy()
        if down:
            hi[j] = math.floor(value)
        else:
            lo[j] = math.ceil(value)
        relaxed = self._solve_relaxation(lo, hi)
        return math.inf if relaxed is None else relaxed[0]

    def _pseudocost_pick(self, fractional, vals, frac, obj, lo, hi):
        """Product-score pseudocost branching; unreliable candidates are strong-branched."""
        if self._pc is None:
            n = len(self._int_idx)
            self._pc = {"sum": np.zeros((2, n)), "count": np.zeros((2, n), dtype=int)}
        pc_sum, pc_count = self._pc["sum"], self._pc["count"]
        order = sorted(fractional, key=lambda j: (-min(frac[j], 1 - frac[j]), j))
        strong: dict[int, tuple[float, float]] = {}
        for j in order:
            if len(strong) >= STRONG_CANDIDATES:
                break
            if min(pc_count[0, j], pc_count[1, j]) >= RELIABILITY:
                continue
            down = self._child_objective(lo, hi, j, True, vals[j])
            up = self._child_objective(lo, hi, j, False, vals[j])
            strong[j] = (down, up)
            for side, child, width in ((0, down, frac[j]), (1, up, 1 - frac[j])):
                if child < math.inf:
                    pc_sum[side, j] += max(child - obj, 0.0) / width
                    pc_count[side, j] += 1
        mean = [pc_sum[k][pc_count[k] > 0].mean() if np.any(pc_count[k] > 0) else 1.0 for k in (0, 1)]
        best, best_score = None, -1.0
        for j in order:
            if j in strong:
                d_gain, u_gain = (min(g - obj, 1e12) if g < math.inf else 1e12 for g in strong[j])
            else:
                d_rate = pc_sum[0, j] / pc_count[0, j] if pc_count[0, j] else mean[0]
                u_rate = pc_sum[1, j] / pc_count[1, j] if pc_count[1, j] else mean[1]
                d_gain, u_gain = d_rate * frac[j], u_rate * (1 - frac[j])
            score = max(d_gain, 1e-6) * max(u_gain, 1e-6)
            if score > best_score + 1e-12:
                best, best_score = j, score
        return best, strong.get(best, (obj, obj))


def open_session(m: Model, p: SolveParams | None = None, start: Assignment | None = None) -> SolveSession:
    return SolveSession(m, p, start)


def step(s: SolveSession, budget: float = math.inf) -> SolveEvent:
    return s.step(budget)


@dataclass
class SolveResult:
    status: EventKind
    ub: float
    lb: float
    incumbent: np.ndarray | None
    solve_time: float
    nodes: int

    @property
    def gap(self) -> float:
        if self.ub == math.inf:
            return 1.0
        if self.lb < 0:
            return 0.0 if self.ub == self.lb else 1.0
        return relative_gap(self.ub, self.lb)


def solve(m: Model, p: SolveParams | None = None, start: Assignment | None = None) -> SolveResult:
    """Run a session to a terminal state (or its time/node limit)."""
    session = SolveSession(m, p, start)
    while True:
        event = session.step()
        if session.finished:
            return SolveResult(event.kind, session.ub, session.lb, session.incumbent,
                               session.elapsed, session.nodes)
