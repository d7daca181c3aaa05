"""The three bad-scenario searches: ISAM, SRP and ASBP.

All ties go to the lowest scenario id. Strict comparisons against a bound
``b`` are evaluated as ``> b + eps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import (
    FindResult, GlobalTimeUp, SecondStageInfeasibleError, Strategy, StrategyContext,
    adjusted_bound,
)
from .solver.session import EventKind

MIN_CHARGE = 1e-3  # rho is decremented by at least this much per step


def _argmax(values: dict[int, float], among) -> int:
    best = None
    for s in sorted(among):
        if best is None or values[s] > values[best]:
            best = s
    return best


def _snapshot(ub: dict, lb: dict, rho: dict | None = None) -> dict:
    out = {}
    for s in sorted(ub):
        entry = {"ub": ub[s], "lb": lb.get(s, 0.0)}
        if rho is not None:
            entry["rho"] = rho[s]
        out[s] = entry
    return out


def isam_find(ctx: StrategyContext) -> FindResult:
    S = ctx.problem.scenarios()
    ub: dict[int, float] = {}
    starts = {}
    for s in S:
        ctx.check_deadline()
        h = ctx.heuristic(s)
        ub[s], starts[s] = h.ub, h.incumbent
    exact: set[int] = set()
    while True:
        k = _argmax(ub, S)
        if k in exact:
            if ub[k] == math.inf and k in ctx.D:
                raise SecondStageInfeasibleError(f"scenario {k} in D is infeasible for the master solution")
            return FindResult(k, ub[k], bounds=_snapshot(ub, {s: ub[s] for s in exact}))
        ctx.check_deadline()
        ub[k] = ctx.solve_exact(k, starts[k])
        exact.add(k)
        if ub[k] == math.inf:
            continue
        if ub[k] >= max(ub.values()):
            return FindResult(k, ub[k], bounds=_snapshot(ub, {s: ub[s] for s in exact}))


def srp_find(ctx: StrategyContext) -> FindResult:
    eps = ctx.cfg.epsilon
    z = ctx.ms.z
    ub: dict[int, float] = {}
    for s in ctx.problem.scenarios():
        if s in ctx.D:
            continue
        ctx.check_deadline()
        h = ctx.heuristic(s, cutoff=z)
        ub[s] = h.ub
        if h.ub > z + eps:
            ub[s] = ctx.solve_exact(s, h.incumbent)
            if ub[s] > z + eps:
                return FindResult(s, ub[s], bounds=_snapshot(ub, {}))
    # every scenario outside D costs at most z; scenarios in D do by master feasibility
    return FindResult(min(ctx.D) if ctx.D else None, z, bounds=_snapshot(ub, {}))


@dataclass
class ScenarioBounds:
    ub: float = math.inf
    lb: float = 0.0
    rho: float = math.inf
    session: object | None = None  # any backend session
    start: object = None
    solved: bool = False  # proven optimal or infeasible

    def effective_lb(self, use_lb: bool) -> float:
        return self.lb if use_lb or self.solved else 0.0


def asbp_find(ctx: StrategyContext) -> FindResult:
    cfg, ms = ctx.cfg, ctx.ms
    eps = cfg.epsilon
    S = ctx.problem.scenarios()
    D = set(ctx.D)
    rho0 = max(cfg.tl_linear * ctx.master_time, cfg.tl_min) if cfg.use_tl else math.inf
    R = set(S) if not cfg.use_zb else set(S) - D
    table = {s: ScenarioBounds(rho=rho0) for s in R}
    for s in sorted(R):
        ctx.check_deadline()
        h = ctx.heuristic(s)
        b = table[s]
        b.ub, b.start = h.ub, h.incumbent
        b.lb = min(h.lb, h.ub)
        b.solved = h.optimal
        if s in D:
            # the master's own recourse block is feasible with cost at most z
            b.ub = min(b.ub, ms.z)
            b.lb = min(b.lb, b.ub)
    z_adj = adjusted_bound(ms.z, ms.f_x, ms.gap_p, cfg.target_gap) if cfg.use_zb else 0.0

    def result(s):
        outside = [table[r].ub for r in table if r not in D]
        bound = max([ms.z] + outside)
        snap = {r: {"ub": b.ub, "lb": b.lb, "rho": b.rho} for r, b in sorted(table.items())}
        return FindResult(s, bound, z_adj, snap)

    try:
        while True:
            ctx.check_deadline()
            max_lb = max((table[r].effective_lb(cfg.use_lb) for r in R), default=0.0)
            R = {r for r in R if table[r].ub > z_adj + eps and table[r].ub >= max_lb - eps}
            if not R:
                return result(min(D) if D else None)
            k = _argmax({r: table[r].ub for r in R}, R)
            bk = table[k]
            lbk = bk.effective_lb(cfg.use_lb)
            if len(R) == 1 and lbk > z_adj + eps:
                return result(k)
            if bk.rho <= 0 or (bk.ub - lbk <= eps) or bk.solved:
                return result(k)
            if bk.session is None:
                bk.session = ctx.exact_session(k, bk.start)
            t0 = ctx.clock.now()
            event = bk.session.step(bk.rho)
            used = ctx.clock.now() - t0
            ctx.times.second_stage += used
            bk.rho -= max(used, MIN_CHARGE)
            if event.kind is EventKind.TIME_LIMIT and bk.session.finished:
                raise GlobalTimeUp
            bk.ub = min(bk.ub, bk.session.ub)
            bk.lb = max(bk.lb, min(bk.session.lb, bk.ub))
            if event.kind in (EventKind.OPTIMAL, EventKind.INFEASIBLE):
                bk.solved = True
                if event.kind is EventKind.INFEASIBLE:
                    bk.ub = bk.lb = math.inf
    finally:
        for b in table.values():
            if b.session is not None:
                b.session.close()


STRATEGIES = {Strategy.ISAM: isam_find, Strategy.SRP: srp_find, Strategy.ASBP: asbp_find}


def find_bad_scenario(ctx: StrategyContext) -> FindResult:
    return STRATEGIES[Strategy(ctx.cfg.strategy)](ctx)
