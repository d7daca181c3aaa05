"""Scenario addition loop for two-stage robust MIPs over a finite scenario set.

The master over a subset ``D`` minimizes ``f(x) + z`` subject to ``z >= g_s(x, y_s)``
for each ``s`` in ``D``. Each pass solves the master to the target gap, asks a
strategy for a bad scenario and stops as soon as the strategy answers with a
scenario that is already in ``D``.
"""
from __future__ import annotations

import abc
import enum
import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .mip.gap import relative_gap
from .mip.model import Assignment, LinearExpr, Model, evaluate
from .solver.clock import DEFAULT_CLOCK, make_clock
from .solver.backends import BACKENDS, make_session
from .solver.session import EventKind, SolveParams


class MasterInfeasibleError(RuntimeError):
    """The master problem has no feasible solution."""


class SecondStageInfeasibleError(RuntimeError):
    """Every scenario's second stage is infeasible for the current first stage."""


class GlobalTimeUp(Exception):
    """Internal signal: the run's global time limit has passed."""


@dataclass
class MasterModel:
    model: Model
    x_vars: list[int]
    z_var: int
    f_expr: LinearExpr | None = None  # f over master variable ids


@dataclass
class HeuristicResult:
    ub: float = math.inf
    lb: float = 0.0
    incumbent: Assignment | None = None
    optimal: bool = False


class TwoStageProblem(abc.ABC):
    """What the scenario addition loop needs from an application.

    ``x`` is always the vector of first-stage values in ``MasterModel.x_vars``
    order. Subclasses may override :meth:`heuristic`; the default is a short
    budgeted run of the embedded branch-and-bound.
    """

    @abc.abstractmethod
    def scenarios(self) -> list[int]: ...

    @abc.abstractmethod
    def build_master(self, D: Sequence[int]) -> MasterModel: ...

    @abc.abstractmethod
    def build_second_stage(self, x: Assignment, s: int) -> Model: ...

    @abc.abstractmethod
    def first_stage_cost(self, x: Assignment) -> float: ...

    def init_hint(self) -> list[int] | None:
        return None

    def heuristic(self, x: Assignment, s: int, budget: float, *, cutoff: float | None = None,
                  clock=None, backend: str = "embedded") -> HeuristicResult:
        return solver_heuristic(self.build_second_stage(x, s), budget, cutoff=cutoff, clock=clock, backend=backend)


def solver_heuristic(model: Model, budget: float, *, cutoff: float | None = None, clock=None,
                     start: Assignment | None = None, backend: str = "embedded") -> HeuristicResult:
    """Budgeted solver run; stops early once ``ub <= cutoff``."""
    if not budget > 0:
        return HeuristicResult()
    session = make_session(model, SolveParams(time_limit=budget, clock=clock), start, backend)
    while not session.finished:
        session.step()
        if cutoff is not None and session.ub <= cutoff:
            break
    if session.ub == math.inf:
        # a heuristic never proves infeasibility
        return HeuristicResult(lb=max(0.0, session.lb) if session.lb < math.inf else 0.0)
    optimal = session._terminal is not None and session._terminal.kind is EventKind.OPTIMAL
    return HeuristicResult(session.ub, max(0.0, session.lb), session.incumbent, optimal)


class Strategy(str, enum.Enum):
    ISAM = "ISAM"
    SRP = "SRP"
    ASBP = "ASBP"


class InitKind(str, enum.Enum):
    EMPTY = "Empty"
    RANDOM = "Random"
    HINT = "Hint"


@dataclass
class SamConfig:
    target_gap: float = 0.0
    strategy: Strategy | str = Strategy.ASBP
    init: InitKind | str = InitKind.EMPTY
    init_seed: int = 0
    tl_linear: float = 1.0
    tl_min: float = 1.0
    heuristic_budget: float = 0.1
    master_time_limit: float = math.inf
    global_time_limit: float = math.inf
    epsilon: float = 1e-9
    use_lb: bool = True
    use_zb: bool = True
    use_tl: bool = True
    clock: str = "wall"
    seconds_per_node: float = 1e-3
    log_path: str | None = None
    seed: int = 0
    master_backend: str = "embedded"
    second_stage_backend: str = "embedded"

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        self.init = InitKind(self.init)
        if not 0.0 <= self.target_gap < 1.0:
            raise ValueError(f"target_gap must lie in [0, 1), got {self.target_gap}")
        if self.tl_linear < 0 or self.tl_min < 0:
            raise ValueError("time limit parameters must be non-negative")
        if self.use_tl and not self.tl_min > 0:
            raise ValueError("tl_min must be positive when time limits are used")
        for b in (self.master_backend, self.second_stage_backend):
            if b not in BACKENDS:
                raise ValueError(f"unknown backend {b!r}; expected one of {sorted(BACKENDS)}")

    def make_clock(self):
        if self.clock == "work":
            return make_clock("work", seconds_per_node=self.seconds_per_node)
        return make_clock(self.clock)


@dataclass
class MasterSolution:
    x: np.ndarray
    z: float
    f_x: float
    gap_p: float
    ub: float
    lb: float


def adjusted_bound(z: float, f_x: float, p: float, P: float) -> float:
    """Bound on every scenario cost that still certifies target gap ``P``."""
    if not 0.0 <= p <= P < 1.0:
        raise ValueError(f"need 0 <= p <= P < 1, got p={p}, P={P}")
    return (1.0 - p) / (1.0 - P) * z + (P - p) / (1.0 - P) * f_x


def init_subset(problem: TwoStageProblem, init: InitKind | str, seed: int = 0) -> list[int]:
    init = InitKind(init)
    if init is InitKind.EMPTY:
        return []
    if init is InitKind.RANDOM:
        return [random.Random(seed).choice(problem.scenarios())]
    hint = problem.init_hint()
    if not hint:
        raise ValueError(f"{type(problem).__name__} provides no initial scenario hint")
    return sorted(set(hint))


@dataclass
class IterationLog:
    iter: int
    D: list[int]
    master_time: float
    master_gap: float
    master_ub: float
    master_lb: float
    z: float
    f_x: float
    chosen: int | None
    added: bool
    z_adjusted: float | None = None
    bounds: dict = field(default_factory=dict)
    times: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and math.isinf(v):
                return "inf" if v > 0 else "-inf"
            if isinstance(v, dict):
                return {str(k): clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v
        return json.dumps(clean(asdict(self)), sort_keys=True)


class RunStatus(str, enum.Enum):
    GAP_CERTIFIED = "GapCertified"
    GLOBAL_TIME_LIMIT = "GlobalTimeLimit"


@dataclass
class SamResult:
    x: np.ndarray | None
    objective_ub: float
    certified_gap: float
    iterations: int  # scenario additions
    master_solves: int
    final_D: list[int]
    logs: list[IterationLog]
    status: RunStatus
    total_time: float = 0.0
    master_time: float = 0.0
    heuristic_time: float = 0.0
    second_stage_time: float = 0.0

    @property
    def certified(self) -> bool:
        return self.status is RunStatus.GAP_CERTIFIED


@dataclass
class PhaseTimes:
    heuristic: float = 0.0
    second_stage: float = 0.0


@dataclass
class FindResult:
    scenario: int | None  # None: D is empty and no scenario exceeds the bound
    bound: float  # certified upper bound on max_s Q(x, s), valid when scenario is in D or None
    z_adjusted: float | None = None
    bounds: dict = field(default_factory=dict)


@dataclass
class StrategyContext:
    problem: TwoStageProblem
    D: list[int]
    ms: MasterSolution
    master_time: float
    cfg: SamConfig
    clock: object
    deadline: float = math.inf
    times: PhaseTimes = field(default_factory=PhaseTimes)

    def check_deadline(self) -> None:
        if self.clock.now() >= self.deadline:
            raise GlobalTimeUp

    def heuristic(self, s: int, cutoff: float | None = None) -> HeuristicResult:
        t0 = self.clock.now()
        try:
            return self.problem.heuristic(self.ms.x, s, self.cfg.heuristic_budget, cutoff=cutoff, clock=self.clock,
                                          backend=self.cfg.second_stage_backend)
        finally:
            self.times.heuristic += self.clock.now() - t0

    def exact_session(self, s: int, start: Assignment | None = None):
        model = self.problem.build_second_stage(self.ms.x, s)
        remaining = self.deadline - self.clock.now()
        params = SolveParams(time_limit=remaining if remaining > 0 else 1e-9, clock=self.clock, seed=self.cfg.seed)
        return make_session(model, params, start, self.cfg.second_stage_backend)

    def solve_exact(self, s: int, start: Assignment | None = None) -> float:
        """Q(x, s) by a full solve; +inf when infeasible."""
        t0 = self.clock.now()
        try:
            session = self.exact_session(s, start)
            while not session.finished:
                session.step()
            if session._terminal.kind is EventKind.TIME_LIMIT:
                raise GlobalTimeUp
            return session.ub
        finally:
            self.times.second_stage += self.clock.now() - t0


def _solve_master(problem: TwoStageProblem, D: list[int], cfg: SamConfig, clock, deadline: float):
    mm = problem.build_master(D)
    limit = min(cfg.master_time_limit, deadline - clock.now())
    if limit <= 0:
        raise GlobalTimeUp
    params = SolveParams(target_gap=cfg.target_gap, time_limit=limit, clock=clock, seed=cfg.seed)
    session = make_session(mm.model, params, backend=cfg.master_backend)
    while not session.finished:
        event = session.step()
    if event.kind is EventKind.INFEASIBLE:
        raise MasterInfeasibleError(f"master over D={D} is infeasible; the first stage admits no solution")
    if session.incumbent is None:
        raise GlobalTimeUp
    return mm, session, event


def run_sam(problem: TwoStageProblem, config: SamConfig | None = None, **overrides) -> SamResult:
    """Run the scenario addition loop with the configured strategy."""
    from .strategies import find_bad_scenario

    cfg = config or SamConfig(**overrides)
    clock = cfg.make_clock() if cfg.clock else DEFAULT_CLOCK
    start = clock.now()
    deadline = start + cfg.global_time_limit
    S = list(problem.scenarios())
    D = init_subset(problem, cfg.init, cfg.init_seed)
    logs: list[IterationLog] = []
    log_fh = open(cfg.log_path, "w") if cfg.log_path else None
    master_time = heur_time = second_time = 0.0
    best_lb = 0.0
    x = None
    last_ub = math.inf
    additions = 0

    def finish(status, objective_ub, gap):
        if log_fh:
            log_fh.close()
        return SamResult(x, objective_ub, gap, additions, len(logs), sorted(D), logs, status,
                         clock.now() - start, master_time, heur_time, second_time)

    try:
        while True:
            t0 = clock.now()
            mm, session, event = _solve_master(problem, D, cfg, clock, deadline)
            mt = clock.now() - t0
            master_time += mt
            values = session.incumbent
            x = np.array([values[v] for v in mm.x_vars])
            z = float(values[mm.z_var])
            f_x = float(problem.first_stage_cost(x))
            best_lb = max(best_lb, session.lb)
            last_ub = session.ub
            p = relative_gap(session.ub, max(0.0, session.lb))
            if p > cfg.target_gap:
                if p > cfg.target_gap + 1e-9:
                    # master stopped on its own time limit above the target gap
                    raise GlobalTimeUp
                p = cfg.target_gap
            ms = MasterSolution(x, z, f_x, p, session.ub, session.lb)
            if clock.now() >= deadline:
                raise GlobalTimeUp
            ctx = StrategyContext(problem, sorted(D), ms, mt, cfg, clock, deadline)
            try:
                found = find_bad_scenario(ctx)
            finally:
                heur_time += ctx.times.heuristic
                second_time += ctx.times.second_stage
            done = found.scenario is None or found.scenario in D
            entry = IterationLog(len(logs), sorted(D), mt, p, session.ub, session.lb, z, f_x,
                                 found.scenario, not done, found.z_adjusted, found.bounds,
                                 {"master": mt, "heuristic": ctx.times.heuristic,
                                  "second_stage": ctx.times.second_stage})
            logs.append(entry)
            if log_fh:
                log_fh.write(entry.to_json() + "\n")
                log_fh.flush()
            if done:
                objective_ub = f_x + found.bound
                return finish(RunStatus.GAP_CERTIFIED, objective_ub,
                              relative_gap(objective_ub, min(best_lb, objective_ub)))
            D.append(found.scenario)
            additions += 1
            if additions > len(S):
                raise RuntimeError("scenario set exhausted without certification")
            if clock.now() >= deadline:
                raise GlobalTimeUp
    except GlobalTimeUp:
        return finish(RunStatus.GLOBAL_TIME_LIMIT, last_ub if x is not None else math.inf, 1.0)
