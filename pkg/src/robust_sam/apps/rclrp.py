"""Recoverable robust capacitated location routing.

First stage: open warehouses (``w0``) and choose their sizes (``a0``).
Second stage, per demand scenario: open more warehouses or enlarge them at
recovery prices, then route capacitated vehicle tours that each start and end
at one warehouse.

Node order is warehouses first, then customers; arc matrices are indexed by
that order. Self-loop arcs exist as variables fixed to zero.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..engine import HeuristicResult, MasterModel, TwoStageProblem, solver_heuristic
from ..mip.model import Assignment, LinearExpr, Model

COST_SCALE = 1.0 / 40.0
RECOVERY_FACTOR = 1.5
P_ZERO = 0.03
P_HIGH = 0.5
HIGH_FACTOR = 1.2
BASE_WAREHOUSES = 5
BASE_CUSTOMERS = 30


@dataclass(frozen=True)
class RclrpInstance:
    warehouses: tuple[str, ...]
    customers: tuple[str, ...]
    c: np.ndarray  # traversal cost
    alpha: np.ndarray  # empty-vehicle emission cost
    gamma: np.ndarray  # emission cost per unit of cargo
    e: np.ndarray
    e_rec: np.ndarray
    d: np.ndarray
    d_rec: np.ndarray
    A: np.ndarray  # max warehouse size
    L: float  # vehicle capacity
    F: float  # fixed cost per tour
    demands: np.ndarray  # scenarios x customers
    coords: np.ndarray | None = None
    nominal: np.ndarray | None = None

    def __post_init__(self):
        nv = len(self.warehouses) + len(self.customers)
        for name in ("c", "alpha", "gamma"):
            mat = getattr(self, name)
            if mat.shape != (nv, nv):
                raise ValueError(f"{name} must be {nv}x{nv}")
            if np.any(mat < 0) or np.any(np.diag(mat) != 0):
                raise ValueError(f"{name} must be non-negative with a zero diagonal")
        if np.any(self.e_rec <= self.e) or np.any(self.d_rec <= self.d):
            raise ValueError("recovery costs must exceed first-stage costs")
        if self.demands.ndim != 2 or self.demands.shape[1] != len(self.customers):
            raise ValueError("demands must be scenarios x customers")
        if np.any(self.demands < 0) or np.any(self.demands > self.L):
            raise ValueError("demands must lie in [0, L]")

    @property
    def n_wh(self) -> int:
        return len(self.warehouses)

    @property
    def n_cust(self) -> int:
        return len(self.customers)

    @property
    def n_nodes(self) -> int:
        return self.n_wh + self.n_cust

    @property
    def n_scenarios(self) -> int:
        return self.demands.shape[0]

    # -- JSON --------------------------------------------------------------

    def to_dict(self) -> dict:
        def mat(a):
            return [[float(v) for v in row] for row in a]

        wh = []
        for i, name in enumerate(self.warehouses):
            entry = {"name": name, "open_cost": float(self.e[i]), "size_cost": float(self.d[i]),
                     "recovery_open_cost": float(self.e_rec[i]), "recovery_size_cost": float(self.d_rec[i])}
            if self.coords is not None:
                entry["x"], entry["y"] = (float(v) for v in self.coords[i])
            wh.append(entry)
        cust = []
        for j, name in enumerate(self.customers):
            entry = {"name": name}
            if self.nominal is not None:
                entry["nominal_demand"] = float(self.nominal[j])
            if self.coords is not None:
                entry["x"], entry["y"] = (float(v) for v in self.coords[self.n_wh + j])
            cust.append(entry)
        return {
            "warehouses": wh,
            "customers": cust,
            "arcs": {"travel": mat(self.c), "empty_emission": mat(self.alpha), "cargo_emission": mat(self.gamma)},
            "costs": {"vehicle_fixed": float(self.F)},
            "capacities": {"vehicle": float(self.L), "warehouse_max": [float(v) for v in self.A]},
            "scenarios": [{"id": s, "demand": [float(v) for v in row]} for s, row in enumerate(self.demands)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RclrpInstance":
        wh, cust = data["warehouses"], data["customers"]
        coords = None
        if all("x" in w for w in wh) and all("x" in c for c in cust):
            coords = np.array([[n["x"], n["y"]] for n in wh + cust], dtype=float)
        nominal = None
        if all("nominal_demand" in c for c in cust):
            nominal = np.array([c["nominal_demand"] for c in cust], dtype=float)
        scen = sorted(data["scenarios"], key=lambda s: s["id"])
        return cls(
            warehouses=tuple(w["name"] for w in wh),
            customers=tuple(c["name"] for c in cust),
            c=np.array(data["arcs"]["travel"], dtype=float),
            alpha=np.array(data["arcs"]["empty_emission"], dtype=float),
            gamma=np.array(data["arcs"]["cargo_emission"], dtype=float),
            e=np.array([w["open_cost"] for w in wh], dtype=float),
            e_rec=np.array([w["recovery_open_cost"] for w in wh], dtype=float),
            d=np.array([w["size_cost"] for w in wh], dtype=float),
            d_rec=np.array([w["recovery_size_cost"] for w in wh], dtype=float),
            A=np.array(data["capacities"]["warehouse_max"], dtype=float),
            L=float(data["capacities"]["vehicle"]),
            F=float(data["costs"]["vehicle_fixed"]),
            demands=np.array([s["demand"] for s in scen], dtype=float).reshape(len(scen), len(cust)),
            coords=coords,
            nominal=nominal,
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "RclrpInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class RclrpGenParams:
    n_warehouses: int
    n_customers: int
    n_scenarios: int
    instance_number: int
    base_seed: int = 0
    base_file: str | None = None  # JSON instance whose nominal data replaces the synthetic base

    def __post_init__(self):
        if min(self.n_warehouses, self.n_customers, self.n_scenarios) < 1:
            raise ValueError("need at least one warehouse, customer and scenario")


def synthetic_base(seed: int = 0) -> RclrpInstance:
    """Nominal 5-warehouse, 30-customer network (one all-nominal scenario)."""
    rng = np.random.default_rng(seed)
    n = BASE_WAREHOUSES + BASE_CUSTOMERS
    coords = rng.integers(0, 101, size=(n, 2)).astype(float)
    diff = coords[:, None, :] - coords[None, :, :]
    c = np.round(np.sqrt((diff ** 2).sum(axis=2)), 2)
    nominal = rng.integers(5, 26, size=BASE_CUSTOMERS).astype(float)
    e_raw = rng.integers(4000, 8001, size=BASE_WAREHOUSES).astype(float)
    d_raw = rng.integers(20, 41, size=BASE_WAREHOUSES).astype(float)
    return RclrpInstance(
        warehouses=tuple(f"W{i}" for i in range(BASE_WAREHOUSES)),
        customers=tuple(f"C{j}" for j in range(BASE_CUSTOMERS)),
        c=c,
        alpha=np.round(0.1 * c, 4),
        gamma=np.round(0.05 * c, 4),
        e=e_raw, e_rec=RECOVERY_FACTOR * e_raw, d=d_raw, d_rec=RECOVERY_FACTOR * d_raw,
        A=np.full(BASE_WAREHOUSES, math.ceil(1.2 * nominal.sum())),
        L=2.0 * nominal.max(),
        F=50.0,
        demands=nominal[None, :].copy(),
        coords=coords,
        nominal=nominal,
    )


def generate_rclrp(p: RclrpGenParams) -> RclrpInstance:
    base = RclrpInstance.load(p.base_file) if p.base_file else synthetic_base(p.base_seed)
    if p.n_warehouses > base.n_wh or p.n_customers > base.n_cust:
        raise ValueError(f"base data has only {base.n_wh} warehouses and {base.n_cust} customers")
    nominal = base.nominal if base.nominal is not None else base.demands[0]
    nodes = list(range(p.n_warehouses)) + [base.n_wh + j for j in range(p.n_customers)]
    sub = np.ix_(nodes, nodes)
    nom = nominal[:p.n_customers]
    rng = np.random.default_rng(p.instance_number)
    u_zero = rng.random((p.n_scenarios, p.n_customers))
    u_high = rng.random((p.n_scenarios, p.n_customers))
    demands = np.where(u_zero < P_ZERO, 0.0, np.where(u_high < P_HIGH, HIGH_FACTOR * nom, nom))
    demands = np.round(demands, 2)
    e = base.e[:p.n_warehouses] * COST_SCALE
    d = base.d[:p.n_warehouses] * COST_SCALE
    L = max(base.L, float(demands.max()))
    return RclrpInstance(
        warehouses=base.warehouses[:p.n_warehouses],
        customers=base.customers[:p.n_customers],
        c=base.c[sub], alpha=base.alpha[sub], gamma=base.gamma[sub],
        e=e, e_rec=RECOVERY_FACTOR * e, d=d, d_rec=RECOVERY_FACTOR * d,
        A=base.A[:p.n_warehouses].copy(), L=L, F=base.F,
        demands=demands,
        coords=None if base.coords is None else base.coords[nodes],
        nominal=nom.copy(),
    )


# -- model builders ----------------------------------------------------------

@dataclass
class ScenarioBlock:
    w: list[int]
    a: list[int]
    r: np.ndarray  # node x node var ids
    t: np.ndarray
    u: np.ndarray  # warehouse x customer var ids
    cost: LinearExpr  # g_s including the first-stage terms


def _add_block(m: Model, inst: RclrpInstance, s: int, w0, a0, fixed_first_stage: bool) -> ScenarioBlock:
    """Second-stage variables and constraints for scenario ``s``.

    ``w0``/``a0`` are per-warehouse expressions: variables in the master,
    constants in a standalone second stage.
    """
    I, J, V = inst.n_wh, inst.n_cust, inst.n_nodes
    beta = inst.demands[s]
    tag = f"s{s}"
    w, a = [], []
    for i in range(I):
        lo_w = w0[i].constant if fixed_first_stage else 0.0
        lo_a = a0[i].constant if fixed_first_stage else 0.0
        w.append(m.add_var(f"w_{tag}_{i}", "binary", lo_w, 1.0))
        a.append(m.add_var(f"a_{tag}_{i}", "continuous", lo_a, inst.A[i]))
    r = np.empty((V, V), dtype=int)
    t = np.empty((V, V), dtype=int)
    for v1 in range(V):
        for v2 in range(V):
            hi = 0.0 if v1 == v2 else 1.0
            r[v1, v2] = m.add_var(f"r_{tag}_{v1}_{v2}", "binary", 0.0, hi)
    for v1 in range(V):
        for v2 in range(V):
            t[v1, v2] = m.add_var(f"t_{tag}_{v1}_{v2}", "continuous", 0.0, 0.0 if v1 == v2 else math.inf)
    u = np.array([[m.add_var(f"u_{tag}_{i}_{j}", "binary") for j in range(J)] for i in range(I)], dtype=int)

    def cust(j):
        return I + j

    for j in range(J):
        if beta[j] > 0:
            v_j = cust(j)
            others = [v for v in range(V) if v != v_j]
            m.add_constr({r[v, v_j]: 1.0 for v in others}, "=", 1.0, f"in_{tag}_{j}")
            m.add_constr({r[v_j, v]: 1.0 for v in others}, "=", 1.0, f"out_{tag}_{j}")
    for i in range(I):
        m.add_constr(LinearExpr({r[i, cust(j)]: 1.0 for j in range(J)})
                     - LinearExpr({r[cust(j), i]: 1.0 for j in range(J)}), "=", 0.0, f"wh_bal_{tag}_{i}")
    for j in range(J):
        v_j = cust(j)
        others = [v for v in range(V) if v != v_j]
        m.add_constr(LinearExpr({t[v, v_j]: 1.0 for v in others})
                     - LinearExpr({t[v_j, v]: 1.0 for v in others}), "=", float(beta[j]), f"flow_{tag}_{j}")
    for v1 in range(V):
        for v2 in range(V):
            if v1 != v2:
                m.add_constr({t[v1, v2]: 1.0, r[v1, v2]: -inst.L}, "<=", 0.0, f"load_{tag}_{v1}_{v2}")
    for i in range(I):
        m.add_constr(LinearExpr({t[i, cust(j)]: 1.0 for j in range(J)}) - LinearExpr({a[i]: 1.0}),
                     "<=", 0.0, f"wh_cap_{tag}_{i}")
        if not fixed_first_stage:
            m.add_constr(a0[i] - LinearExpr({a[i]: 1.0}), "<=", 0.0, f"keep_size_{tag}_{i}")
            m.add_constr(w0[i] - LinearExpr({w[i]: 1.0}), "<=", 0.0, f"keep_open_{tag}_{i}")
        m.add_constr({a[i]: 1.0, w[i]: -inst.A[i]}, "<=", 0.0, f"max_size_{tag}_{i}")
    for i in range(I):
        for j1 in range(J):
            for j2 in range(J):
                if j1 != j2:
                    m.add_constr({u[i, j1]: 1.0, u[i, j2]: -1.0, r[cust(j1), cust(j2)]: 1.0,
                                  r[cust(j2), cust(j1)]: 1.0}, "<=", 1.0, f"same_wh_{tag}_{i}_{j1}_{j2}")
        for j in range(J):
            m.add_constr({u[i, j]: 1.0, r[i, cust(j)]: -1.0}, ">=", 0.0, f"first_arc_{tag}_{i}_{j}")
            m.add_constr({u[i, j]: 1.0, r[cust(j), i]: -1.0}, ">=", 0.0, f"last_arc_{tag}_{i}_{j}")
    for j in range(J):
        if beta[j] > 0:
            m.add_constr({u[i, j]: 1.0 for i in range(I)}, "=", 1.0, f"served_{tag}_{j}")

    cost = LinearExpr()
    for i in range(I):
        cost = cost + inst.e_rec[i] * (LinearExpr({w[i]: 1.0}) - w0[i])
        cost = cost + inst.d_rec[i] * (LinearExpr({a[i]: 1.0}) - a0[i])
    arc_terms: dict[int, float] = {}
    for v1 in range(V):
        for v2 in range(V):
            if v1 == v2:
                continue
            coef = inst.c[v1, v2] + inst.alpha[v1, v2]
            if v1 < I <= v2:
                coef += inst.F
            arc_terms[r[v1, v2]] = coef
            arc_terms[t[v1, v2]] = inst.gamma[v1, v2]
    cost = cost + LinearExpr(arc_terms)
    return ScenarioBlock(w, a, r, t, u, cost)


def build_master(inst: RclrpInstance, D: Sequence[int]) -> MasterModel:
    m = Model("rclrp_master")
    w0 = [m.add_var(f"w0_{i}", "binary") for i in range(inst.n_wh)]
    a0 = [m.add_var(f"a0_{i}", "continuous", 0.0, inst.A[i]) for i in range(inst.n_wh)]
    z = m.add_var("z", "continuous", 0.0)
    for i in range(inst.n_wh):
        m.add_constr({a0[i]: 1.0, w0[i]: -inst.A[i]}, "<=", 0.0, f"first_size_{i}")
    w0e = [LinearExpr({v: 1.0}) for v in w0]
    a0e = [LinearExpr({v: 1.0}) for v in a0]
    for s in sorted(D):
        block = _add_block(m, inst, s, w0e, a0e, fixed_first_stage=False)
        m.add_constr(LinearExpr({z: 1.0}) - block.cost, ">=", 0.0, f"epi_{s}")
    f_expr = LinearExpr({**{w0[i]: inst.e[i] for i in range(inst.n_wh)},
                         **{a0[i]: inst.d[i] for i in range(inst.n_wh)}})
    m.set_objective(f_expr + LinearExpr({z: 1.0}))
    return MasterModel(m, w0 + a0, z, f_expr)


def split_first_stage(inst: RclrpInstance, x: Assignment) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    w0 = np.round(x[:inst.n_wh])
    a0 = np.clip(x[inst.n_wh:], 0.0, None) * (w0 > 0.5)
    return w0, a0


def build_second_stage_with_block(inst: RclrpInstance, x: Assignment, s: int) -> tuple[Model, ScenarioBlock]:
    w0, a0 = split_first_stage(inst, x)
    m = Model(f"rclrp_s{s}")
    block = _add_block(m, inst, s, [LinearExpr(constant=v) for v in w0],
                       [LinearExpr(constant=v) for v in a0], fixed_first_stage=True)
    m.set_objective(block.cost)
    return m, block


def build_second_stage(inst: RclrpInstance, x: Assignment, s: int) -> Model:
    return build_second_stage_with_block(inst, x, s)[0]


def first_stage_cost(inst: RclrpInstance, x: Assignment) -> float:
    w0, a0 = split_first_stage(inst, x)
    return float(inst.e @ w0 + inst.d @ a0)


def rclrp_heuristic(inst: RclrpInstance, x: Assignment, s: int, budget: float = 0.1, *,
                    cutoff: float | None = None, clock=None, backend: str = "embedded") -> HeuristicResult:
    return solver_heuristic(build_second_stage(inst, x, s), budget, cutoff=cutoff, clock=clock, backend=backend)


def tours(inst: RclrpInstance, block: ScenarioBlock, values: Assignment) -> list[list[int]]:
    """Cycle decomposition of the used arcs (node indices, starting node first)."""
    V = inst.n_nodes
    used = {(v1, v2) for v1 in range(V) for v2 in range(V) if v1 != v2 and values[block.r[v1, v2]] > 0.5}
    succ: dict[int, list[int]] = {}
    for v1, v2 in sorted(used):
        succ.setdefault(v1, []).append(v2)
    cycles = []
    remaining = set(used)
    while remaining:
        v1, v2 = min(remaining)
        cycle = [v1]
        remaining.discard((v1, v2))
        cur = v2
        while cur != v1:
            cycle.append(cur)
            nxt = next((b for b in succ.get(cur, []) if (cur, b) in remaining), None)
            if nxt is None:
                break
            remaining.discard((cur, nxt))
            cur = nxt
        cycles.append(cycle)
    return cycles


class RclrpProblem(TwoStageProblem):
    def __init__(self, inst: RclrpInstance, heuristic_budget: float | None = None):
        self.inst = inst
        self.heuristic_budget = heuristic_budget

    def scenarios(self) -> list[int]:
        return list(range(self.inst.n_scenarios))

    def build_master(self, D):
        return build_master(self.inst, D)

    def build_second_stage(self, x, s):
        return build_second_stage(self.inst, x, s)

    def first_stage_cost(self, x) -> float:
        return first_stage_cost(self.inst, x)

    def heuristic(self, x, s, budget, *, cutoff=None, clock=None, backend="embedded"):
        if self.heuristic_budget is not None:
            budget = self.heuristic_budget
        return rclrp_heuristic(self.inst, x, s, budget, cutoff=cutoff, clock=clock, backend=backend)
