"""Robust berth allocation with quay crane assignment and scheduling.

First stage: relative vessel positions in time (``e``) and space (``u``),
berth positions ``b`` and the section indicators ``pi``/``sigma``. Second
stage, per arrival scenario: crane-to-vessel assignment per period and
berthing/departure times. The objective is the total time in port.

Periods are indexed ``0..M-1`` and berth sections ``0..J``. Cranes are
numbered from the top of the wharf downwards: with ``u[k, l] = 1`` (vessel
``l`` lies below ``k``) no crane may serve ``k`` while a lower-numbered crane
serves ``l``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..engine import HeuristicResult, MasterModel, TwoStageProblem, solver_heuristic
from ..mip.model import Assignment, LinearExpr, Model, check_feasible, evaluate


def group_bounds(n: int) -> list[range]:
    """Three contiguous vessel groups of near-equal size (round half up)."""
    if n < 3:
        raise ValueError(f"need at least 3 vessels, got {n}")
    r = math.floor(n / 3 + 0.5)
    return [range(0, r), range(r, 2 * r), range(2 * r, n)]


def deviation_vectors(n: int) -> list[tuple[float, ...]]:
    """All delay patterns with at most one delayed vessel per group, in lexicographic order."""
    parts = []
    for g in group_bounds(n):
        options = [tuple([0.0] * len(g))]
        for pos in range(len(g)):
            for level in (0.5, 1.0):
                vec = [0.0] * len(g)
                vec[pos] = level
                options.append(tuple(vec))
        parts.append(sorted(options))
    return [sum(combo, ()) for combo in itertools.product(*parts)]


def enumerate_scenarios(n: int, A: Sequence[int], A_hat: Sequence[int]) -> list[tuple[int, ...]]:
    """Arrival vectors for every deviation pattern; half delays round up to whole periods."""
    A, A_hat = list(A), list(A_hat)
    if len(A) != n or len(A_hat) != n:
        raise ValueError("arrival vectors must have one entry per vessel")
    return [tuple(int(a + math.ceil(h * dl)) for a, h, dl in zip(A, A_hat, delta))
            for delta in deviation_vectors(n)]


@dataclass(frozen=True)
class BacaspInstance:
    H: tuple[int, ...]  # vessel length in sections
    Q: tuple[int, ...]  # cargo volume
    A: tuple[int, ...]  # nominal arrival period
    A_hat: tuple[int, ...]  # maximum delay
    NC: tuple[int, ...]  # max simultaneous cranes per vessel
    crane_start: tuple[int, ...]
    crane_end: tuple[int, ...]
    rate: tuple[float, ...]
    J: int  # sections are 0..J
    M: int  # periods are 0..M-1
    F: int  # safety time
    scenario_ids: tuple[int, ...] | None = None  # subset of the enumeration; None means all
    _arrivals: tuple = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.H)
        if any(len(v) != n for v in (self.Q, self.A, self.A_hat, self.NC)):
            raise ValueError("vessel data must have equal lengths")
        if any(h > self.J + 1 for h in self.H):
            raise ValueError("vessel longer than the wharf")
        if any(not 0 <= s <= e <= self.J for s, e in zip(self.crane_start, self.crane_end)):
            raise ValueError("crane ranges must satisfy 0 <= S_g <= E_g <= J")
        if any(a + h > self.M - 1 for a, h in zip(self.A, self.A_hat)):
            raise ValueError("every delayed arrival must leave at least one period")
        if any(p <= 0 for p in self.rate):
            raise ValueError("processing rates must be positive")
        full = enumerate_scenarios(n, self.A, self.A_hat) if n >= 3 else [tuple(self.A)]
        ids = range(len(full)) if self.scenario_ids is None else self.scenario_ids
        object.__setattr__(self, "_arrivals", tuple(full[i] for i in ids))

    @property
    def N(self) -> int:
        return len(self.H)

    @property
    def C(self) -> int:
        return len(self.rate)

    @property
    def arrivals(self) -> tuple[tuple[int, ...], ...]:
        return self._arrivals

    def to_dict(self) -> dict:
        return {
            "vessels": [{"length": h, "cargo": q, "arrival": a, "max_delay": ah, "max_cranes": nc}
                        for h, q, a, ah, nc in zip(self.H, self.Q, self.A, self.A_hat, self.NC)],
            "cranes": [{"start": s, "end": e, "rate": p}
                       for s, e, p in zip(self.crane_start, self.crane_end, self.rate)],
            "horizon": self.M,
            "safety": self.F,
            "berth_sections": self.J + 1,
            "uncertainty": {"kind": "grouped_budget",
                            "scenario_ids": None if self.scenario_ids is None else list(self.scenario_ids)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BacaspInstance":
        v, c = d["vessels"], d["cranes"]
        ids = d.get("uncertainty", {}).get("scenario_ids")
        return cls(
            H=tuple(x["length"] for x in v), Q=tuple(x["cargo"] for x in v), A=tuple(x["arrival"] for x in v),
            A_hat=tuple(x["max_delay"] for x in v), NC=tuple(x["max_cranes"] for x in v),
            crane_start=tuple(x["start"] for x in c), crane_end=tuple(x["end"] for x in c),
            rate=tuple(float(x["rate"]) for x in c), J=d["berth_sections"] - 1, M=d["horizon"], F=d["safety"],
            scenario_ids=None if ids is None else tuple(ids),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "BacaspInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))


def crane_ranges(n_cranes: int, J: int, width: int) -> list[tuple[int, int]]:
    """Evenly spread overlapping ranges, crane 0 at the top of the wharf."""
    width = min(width, J)
    if n_cranes == 1:
        bottom_up = [(0, width)]
    else:
        bottom_up = [(round(h * (J - width) / (n_cranes - 1)), round(h * (J - width) / (n_cranes - 1)) + width)
                     for h in range(n_cranes)]
    return bottom_up[::-1]


def bacasp_generate(N: int, seed: int, *, sections: int = 10, cranes: int = 4, rate: float = 10.0,
                    cargo: tuple[int, int] = (10, 40), lengths: tuple[int, int] = (2, 4),
                    arrival_max: int | None = None, delay: tuple[int, int] = (1, 4), max_cranes: int = 2,
                    safety: int = 1, horizon: int | None = None, n_scenarios: int | None = None) -> BacaspInstance:
    """Synthetic instance; ``n_scenarios`` samples that many scenarios (nominal always kept)."""
    if N < 3:
        raise ValueError(f"need at least 3 vessels, got {N}")
    rng = np.random.default_rng(seed)
    H = tuple(int(v) for v in rng.integers(lengths[0], lengths[1] + 1, N))
    Q = tuple(int(v) for v in rng.integers(cargo[0], cargo[1] + 1, N))
    A = tuple(int(v) for v in rng.integers(0, (2 * N if arrival_max is None else arrival_max) + 1, N))
    A_hat = tuple(int(v) for v in rng.integers(delay[0], delay[1] + 1, N))
    J = sections - 1
    ranges = crane_ranges(cranes, J, max(max(H) + 1, (J + 1) // 2))
    M = horizon if horizon is not None else 2 * N + max(A_hat) + math.ceil(sum(Q) / rate) + 4
    M = max(M, max(a + h for a, h in zip(A, A_hat)) + 1)
    ids = None
    if n_scenarios is not None:
        total = len(deviation_vectors(N))
        if n_scenarios < total:
            others = rng.choice(np.arange(1, total), size=n_scenarios - 1, replace=False)
            ids = tuple(sorted([0] + [int(v) for v in others]))
    return BacaspInstance(H=H, Q=Q, A=A, A_hat=A_hat, NC=(max_cranes,) * N,
                          crane_start=tuple(r[0] for r in ranges), crane_end=tuple(r[1] for r in ranges),
                          rate=(float(rate),) * cranes, J=J, M=M, F=safety, scenario_ids=ids)


def slack_score(arrivals: Sequence[int]) -> float:
    """Sum of gaps between consecutive sorted arrivals (equals max minus min)."""
    ordered = sorted(arrivals)
    return float(sum(b - a for a, b in zip(ordered, ordered[1:])))


def slack_reduction_init(inst: BacaspInstance) -> int:
    scores = [slack_score(a) for a in inst.arrivals]
    return int(np.argmin(scores))


# -- model builders ----------------------------------------------------------

@dataclass
class FirstStageVars:
    e: dict  # (k, l) -> expr
    u: dict
    b: list
    pi: list  # [k][n]
    sigma: list
    ids: list[int] = field(default_factory=list)  # master var ids in x order


@dataclass
class SecondStageVars:
    d: dict  # (g, k, j) -> id
    t: list[int]
    c: list[int]
    alpha: list[list[int]]
    beta: list[list[int]]
    gamma: list[list[int]]
    cost: LinearExpr


def _constr(m: Model, expr: LinearExpr, sense: str, rhs: float, name: str) -> None:
    """Add a row; rows whose variables were all fixed by the first stage are checked, not added."""
    if not expr.terms:
        lhs = expr.constant
        ok = (lhs <= rhs + 1e-9) if sense == "<=" else (lhs >= rhs - 1e-9) if sense == ">=" else abs(lhs - rhs) <= 1e-9
        if ok:
            return
    m.add_constr(expr, sense, rhs, name)


def _var(v: int) -> LinearExpr:
    return LinearExpr({v: 1.0})


def _first_stage_vars(m: Model, inst: BacaspInstance) -> FirstStageVars:
    N, J = inst.N, inst.J
    pairs = [(k, l) for k in range(N) for l in range(N) if k != l]
    e = {p: m.add_var(f"e_{p[0]}_{p[1]}", "binary") for p in pairs}
    u = {p: m.add_var(f"u_{p[0]}_{p[1]}", "binary") for p in pairs}
    b = [m.add_var(f"b_{k}", "integer", 0, J) for k in range(N)]
    pi = [[m.add_var(f"pi_{k}_{n}", "binary") for n in range(J + 1)] for k in range(N)]
    sigma = [[m.add_var(f"sigma_{k}_{n}", "binary") for n in range(J + 1)] for k in range(N)]
    ids = [e[p] for p in pairs] + [u[p] for p in pairs] + b + sum(pi, []) + sum(sigma, [])
    return FirstStageVars({p: _var(v) for p, v in e.items()}, {p: _var(v) for p, v in u.items()},
                          [_var(v) for v in b], [[_var(v) for v in row] for row in pi],
                          [[_var(v) for v in row] for row in sigma], ids)


def _first_stage_constraints(m: Model, inst: BacaspInstance, fs: FirstStageVars) -> None:
    N, J, H = inst.N, inst.J, inst.H
    for k in range(N):
        for l in range(k + 1, N):
            m.add_constr(fs.e[l, k] + fs.e[k, l] + fs.u[l, k] + fs.u[k, l], "=", 1.0, f"relpos_{k}_{l}")
    for k in range(N):
        m.add_constr(fs.b[k], "<=", J - H[k] + 1, f"fits_{k}")
        for l in range(N):
            if k != l:
                m.add_constr(fs.b[k] - fs.b[l] - (J + 1) * fs.u[k, l], ">=", H[l] - (J + 1), f"below_{k}_{l}")
                m.add_constr(fs.b[k] - fs.b[l] - J * fs.u[k, l], "<=", H[l] - 1, f"notabove_{k}_{l}")
        m.add_constr(fs.b[k] - sum((n * fs.pi[k][n] for n in range(J + 1)), LinearExpr()), "=", 0.0, f"bpos_{k}")
        m.add_constr(sum(fs.sigma[k], LinearExpr()), "=", H[k], f"len_{k}")
        m.add_constr(sum(fs.pi[k], LinearExpr()), "=", 1.0, f"onestart_{k}")
        m.add_constr(fs.pi[k][0] - fs.sigma[k][0], ">=", 0.0, f"start0_{k}")
        for n in range(J + 1):
            m.add_constr(fs.pi[k][n] - fs.sigma[k][n], "<=", 0.0, f"startin_{k}_{n}")
            if n > 0:
                m.add_constr(fs.pi[k][n] - fs.sigma[k][n] + fs.sigma[k][n - 1], ">=", 0.0, f"startup_{k}_{n}")
                m.add_constr(fs.pi[k][n] + fs.sigma[k][n - 1], "<=", 1.0, f"startgap_{k}_{n}")
    for k in range(N):
        for l in range(N):
            if k == l:
                continue
            for n in range(J + 1):
                lo = max(n - H[l] + 1, 0)
                expr = fs.u[k, l] + sum((fs.pi[l][mm] for mm in range(lo, J + 1)), LinearExpr()) + fs.pi[k][n]
                m.add_constr(expr, "<=", 2.0, f"clear_{k}_{l}_{n}")


def _second_stage_block(m: Model, inst: BacaspInstance, s: int, fs: FirstStageVars) -> SecondStageVars:
    N, M, C, J, F = inst.N, inst.M, inst.C, inst.J, inst.F
    A = inst.arrivals[s]
    tag = f"s{s}"
    d = {}
    for g in range(C):
        for k in range(N):
            for j in range(M):
                d[g, k, j] = m.add_var(f"d_{tag}_{g}_{k}_{j}", "binary")
    t = [m.add_var(f"t_{tag}_{k}", "integer", A[k], M - 1) for k in range(N)]
    c = [m.add_var(f"c_{tag}_{k}", "integer", A[k], M) for k in range(N)]
    alpha = [[m.add_var(f"alpha_{tag}_{k}_{j}", "binary") for j in range(M)] for k in range(N)]
    beta = [[m.add_var(f"beta_{tag}_{k}_{j}", "binary") for j in range(M)] for k in range(N)]
    gamma = [[m.add_var(f"gamma_{tag}_{k}_{j}", "binary") for j in range(M)] for k in range(N)]
    D = {key: _var(v) for key, v in d.items()}
    T, Cv = [_var(v) for v in t], [_var(v) for v in c]

    for k in range(N):
        for l in range(N):
            if k != l:
                _constr(m, T[l] - Cv[k] - (M + F) * fs.e[k, l], ">=", F - (M + F), f"after_{tag}_{k}_{l}")
    for g in range(C):
        for j in range(M):
            m.add_constr(sum((D[g, k, j] for k in range(N)), LinearExpr()), "<=", 1.0, f"onevessel_{tag}_{g}_{j}")
    for k in range(N):
        for j in range(M):
            for g in range(C):
                m.add_constr(T[k] + (M - j) * D[g, k, j], "<=", M, f"startby_{tag}_{g}_{k}_{j}")
                m.add_constr(Cv[k] - (j + 1) * D[g, k, j], ">=", 0.0, f"endafter_{tag}_{g}_{k}_{j}")
                _constr(m, fs.b[k] - (inst.crane_end[g] - J - 1) * D[g, k, j], "<=", J + 1 - inst.H[k],
                        f"reachtop_{tag}_{g}_{k}_{j}")
                _constr(m, fs.b[k] - inst.crane_start[g] * D[g, k, j], ">=", 0.0, f"reachbot_{tag}_{g}_{k}_{j}")
        m.add_constr(sum((inst.rate[g] * D[g, k, j] for g in range(C) for j in range(M)), LinearExpr()),
                     ">=", inst.Q[k], f"cargo_{tag}_{k}")
    for j in range(M):
        for k in range(N):
            for l in range(N):
                if k == l:
                    continue
                for g in range(C):
                    for g2 in range(g):
                        _constr(m, D[g, k, j] + D[g2, l, j] + fs.u[k, l], "<=", 2.0, f"nocross_{tag}_{j}_{k}_{l}_{g}_{g2}")
        for k in range(N):
            m.add_constr(sum((D[g, k, j] for g in range(C)), LinearExpr()), "<=", inst.NC[k], f"ncmax_{tag}_{k}_{j}")
    for k in range(N):
        for g in range(C):
            lo, hi = inst.crane_start[g], inst.crane_end[g] - inst.H[k]
            reach = sum((fs.pi[k][n] for n in range(lo, hi + 1)), LinearExpr())
            for j in range(M):
                _constr(m, D[g, k, j] - reach, "<=", 0.0, f"reachpos_{tag}_{g}_{k}_{j}")
        Al = [_var(v) for v in alpha[k]]
        Be = [_var(v) for v in beta[k]]
        Ga = [_var(v) for v in gamma[k]]
        m.add_constr(T[k] - sum((j * Al[j] for j in range(M)), LinearExpr()), "=", 0.0, f"tdef_{tag}_{k}")
        m.add_constr(sum(Al, LinearExpr()), "=", 1.0, f"onealpha_{tag}_{k}")
        m.add_constr(sum(Ga, LinearExpr()), "=", 1.0, f"onegamma_{tag}_{k}")
        for j in range(M):
            m.add_constr(Cv[k] - (j + 1) * Be[j], ">=", 0.0, f"opend_{tag}_{k}_{j}")
            for g in range(C):
                m.add_constr(D[g, k, j] - Be[j], "<=", 0.0, f"craneop_{tag}_{g}_{k}_{j}")
            m.add_constr(Al[j] - Be[j], "<=", 0.0, f"alphain_{tag}_{k}_{j}")
            m.add_constr(Ga[j] - Be[j], "<=", 0.0, f"gammain_{tag}_{k}_{j}")
            if j > 0:
                m.add_constr(Al[j] - Be[j] + Be[j - 1], ">=", 0.0, f"alphaup_{tag}_{k}_{j}")
                m.add_constr(Al[j] + Be[j - 1], "<=", 1.0, f"alphagap_{tag}_{k}_{j}")
            else:
                m.add_constr(Al[0] - Be[0], ">=", 0.0, f"alpha0_{tag}_{k}")
            if j < M - 1:
                m.add_constr(Ga[j] - Be[j] + Be[j + 1], ">=", 0.0, f"gammadown_{tag}_{k}_{j}")
                m.add_constr(Ga[j] + Be[j + 1], "<=", 1.0, f"gammagap_{tag}_{k}_{j}")
            else:
                m.add_constr(Ga[j] - Be[j], ">=", 0.0, f"gammalast_{tag}_{k}")
    for k in range(N):
        for l in range(N):
            if k == l:
                continue
            for j in range(M):
                for i in range(max(j - F, 0), M):
                    _constr(m, fs.e[k, l] + _var(beta[k][i]) + _var(alpha[l][j]), "<=", 2.0,
                            f"gapsafe_{tag}_{k}_{l}_{j}_{i}")
    cost = sum((Cv[k] for k in range(N)), LinearExpr()) - float(sum(A))
    return SecondStageVars(d, t, c, alpha, beta, gamma, cost)


def build_master(inst: BacaspInstance, D: Sequence[int]) -> MasterModel:
    m = Model("bacasp_master")
    fs = _first_stage_vars(m, inst)
    z = m.add_var("z", "continuous", 0.0)
    _first_stage_constraints(m, inst, fs)
    for s in sorted(D):
        block = _second_stage_block(m, inst, s, fs)
        m.add_constr(_var(z) - block.cost, ">=", 0.0, f"epi_{s}")
    m.set_objective(_var(z))
    return MasterModel(m, fs.ids, z, LinearExpr())


def fixed_first_stage(inst: BacaspInstance, x: Assignment) -> FirstStageVars:
    """First-stage values from ``x`` (master ``x_vars`` order) as constant expressions."""
    N, J = inst.N, inst.J
    vals = [float(round(v)) for v in x]
    pairs = [(k, l) for k in range(N) for l in range(N) if k != l]
    pos = 0

    def take(count):
        nonlocal pos
        out = vals[pos:pos + count]
        pos += count
        return [LinearExpr(constant=v) for v in out]

    e = dict(zip(pairs, take(len(pairs))))
    u = dict(zip(pairs, take(len(pairs))))
    b = take(N)
    pi = [take(J + 1) for _ in range(N)]
    sigma = [take(J + 1) for _ in range(N)]
    return FirstStageVars(e, u, b, pi, sigma)


def build_second_stage_with_vars(inst: BacaspInstance, x: Assignment, s: int) -> tuple[Model, SecondStageVars]:
    m = Model(f"bacasp_s{s}")
    block = _second_stage_block(m, inst, s, fixed_first_stage(inst, x))
    m.set_objective(block.cost)
    return m, block


def build_second_stage(inst: BacaspInstance, x: Assignment, s: int) -> Model:
    return build_second_stage_with_vars(inst, x, s)[0]


def greedy_schedule(inst: BacaspInstance, x: Assignment, s: int) -> HeuristicResult:
    """Earliest-arrival-first berthing, then as many admissible cranes per period as allowed.

    The schedule is checked against the second-stage model; anything it
    cannot place yields an empty result.
    """
    model, vars_ = build_second_stage_with_vars(inst, x, s)
    fs = fixed_first_stage(inst, x)
    N, M, C = inst.N, inst.M, inst.C
    A = inst.arrivals[s]
    b = [int(round(v.constant)) for v in fs.b]
    e = {p: v.constant > 0.5 for p, v in fs.e.items()}
    u = {p: v.constant > 0.5 for p, v in fs.u.items()}
    reach = [[inst.crane_start[g] <= b[k] and b[k] + inst.H[k] <= inst.crane_end[g] for g in range(C)]
             for k in range(N)]
    busy: dict[tuple[int, int], int] = {}  # (g, j) -> vessel
    start, finish = [None] * N, [None] * N
    todo = set(range(N))
    while todo:
        ready = [k for k in todo if all(finish[l] is not None for l in range(N) if l != k and e[l, k])]
        if not ready:
            return HeuristicResult()
        k = min(ready, key=lambda v: (A[v], v))
        todo.discard(k)
        earliest = max([A[k]] + [finish[l] + inst.F for l in range(N) if l != k and e[l, k]])
        remaining = inst.Q[k]
        j = earliest
        first = None
        while remaining > 1e-9:
            if j >= M:
                return HeuristicResult()
            used = 0
            for g in range(C):
                if used >= inst.NC[k] or not reach[k][g] or (g, j) in busy:
                    continue
                clash = any((u[k, l] and g2 < g) or (u[l, k] and g < g2)
                            for (g2, jj), l in busy.items() if jj == j and l != k)
                if clash:
                    continue
                if first is None:
                    first = j
                busy[g, j] = k
                used += 1
                remaining -= inst.rate[g]
                if remaining <= 1e-9:
                    break
            j += 1
        start[k], finish[k] = first, j
    values = np.zeros(model.num_vars)
    for (g, j), k in busy.items():
        values[vars_.d[g, k, j]] = 1.0
    for k in range(N):
        values[vars_.t[k]] = start[k]
        values[vars_.c[k]] = finish[k]
        values[vars_.alpha[k][start[k]]] = 1.0
        values[vars_.gamma[k][finish[k] - 1]] = 1.0
        for j in range(start[k], finish[k]):
            values[vars_.beta[k][j]] = 1.0
    if not check_feasible(model, values):
        return HeuristicResult()
    return HeuristicResult(evaluate(model.objective, values), 0.0, values)


class BacaspProblem(TwoStageProblem):
    def __init__(self, inst: BacaspInstance, greedy: bool = False, heuristic_budget: float | None = None):
        self.inst = inst
        self.greedy = greedy
        self.heuristic_budget = heuristic_budget

    def scenarios(self) -> list[int]:
        return list(range(len(self.inst.arrivals)))

    def build_master(self, D):
        return build_master(self.inst, D)

    def build_second_stage(self, x, s):
        return build_second_stage(self.inst, x, s)

    def first_stage_cost(self, x) -> float:
        return 0.0

    def init_hint(self):
        return [slack_reduction_init(self.inst)]

    def heuristic(self, x, s, budget, *, cutoff=None, clock=None, backend="embedded"):
        if self.greedy:
            return greedy_schedule(self.inst, x, s)
        if self.heuristic_budget is not None:
            budget = self.heuristic_budget
        return solver_heuristic(self.build_second_stage(x, s), budget, cutoff=cutoff, clock=clock,
                                backend=backend)
