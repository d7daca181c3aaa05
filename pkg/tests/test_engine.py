import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_sam.apps.tabulated import TabulatedProblem
from robust_sam.engine import (
    InitKind, MasterInfeasibleError, RunStatus, SamConfig, TwoStageProblem, init_subset, run_sam,
)
from robust_sam.mip import relative_gap

STRATEGIES = ["ISAM", "SRP", "ASBP"]


def random_table_problem(seed):
    rng = np.random.default_rng(seed)
    K, n = int(rng.integers(1, 5)), int(rng.integers(1, 7))
    table = rng.integers(0, 30, (K, n)).astype(float)
    f = rng.integers(0, 15, K).astype(float)
    loose = rng.random() < 0.5
    h_ub = table + rng.integers(0, 5, (K, n)) if loose else None
    return TabulatedProblem(table, f, heuristic_ub=h_ub, heuristic_lb=None if h_ub is None else table * 0.5)


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_two_scenario_toy(strategy):
    r = run_sam(TabulatedProblem([[5.0, 9.0]]), strategy=strategy)
    assert r.status is RunStatus.GAP_CERTIFIED
    assert r.objective_ub == 9.0 and r.master_solves <= 3 and r.iterations <= 2


def test_init_subset():
    prob = TabulatedProblem(np.zeros((1, 16)), hint=[3])
    assert init_subset(prob, "Empty") == []
    assert init_subset(prob, InitKind.RANDOM, 7) == init_subset(prob, InitKind.RANDOM, 7)
    assert len(init_subset(prob, "Random", 7)) == 1
    assert init_subset(prob, "Hint") == [3]
    with pytest.raises(ValueError):
        init_subset(TabulatedProblem(np.zeros((1, 2))), "Hint")


def test_config_validation():
    with pytest.raises(ValueError):
        SamConfig(target_gap=1.0)
    with pytest.raises(ValueError):
        SamConfig(tl_min=0.0)
    SamConfig(tl_min=0.0, use_tl=False)
    with pytest.raises(ValueError):
        SamConfig(master_backend="cplex")
    with pytest.raises(ValueError):
        SamConfig(strategy="XYZ")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(STRATEGIES), st.sampled_from([0.0, 0.05, 0.1, 0.3]),
       st.sampled_from(["Empty", "Random"]))
def test_certificate_and_termination(seed, strategy, P, init):
    prob = random_table_problem(seed)
    opt = prob.optimum()
    r = run_sam(prob, strategy=strategy, target_gap=P, init=init, init_seed=seed)
    assert r.status is RunStatus.GAP_CERTIFIED
    assert r.iterations <= len(prob.scenarios())
    k = prob.option(r.x)
    true_value = prob.f[k] + prob.table[k].max()
    # objective_ub bounds the true worst case of x and is within P of the optimum
    assert true_value <= r.objective_ub + 1e-6
    assert r.objective_ub <= opt / (1 - P) + 1e-6
    assert r.certified_gap <= P + 1e-9
    if P == 0:
        assert r.objective_ub == pytest.approx(opt, abs=1e-6)
    lbs = [log.master_lb for log in r.logs]
    assert all(b >= a - 1e-6 for a, b in zip(lbs, lbs[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([0.0, 0.1]))
def test_asbp_generalized_certificate(seed, P):
    prob = random_table_problem(seed)
    r = run_sam(prob, strategy="ASBP", target_gap=P)
    last = r.logs[-1]
    k = prob.option(r.x)
    assert prob.table[k].max() <= last.z_adjusted + 1e-6


def test_jsonl_log(tmp_path):
    path = tmp_path / "run.jsonl"
    r = run_sam(TabulatedProblem([[5.0, 9.0, 7.0]]), strategy="ASBP", log_path=str(path))
    lines = path.read_text().splitlines()
    assert len(lines) == r.master_solves
    rec = json.loads(lines[0])
    for key in ("iter", "D", "master_time", "master_gap", "chosen", "bounds", "times"):
        assert key in rec
    assert rec["master_time"] >= 0


def test_global_time_limit():
    prob = TabulatedProblem(np.arange(40, dtype=float).reshape(4, 10), stepped=True)
    r = run_sam(prob, strategy="ISAM", global_time_limit=1e-9)
    assert r.status is RunStatus.GLOBAL_TIME_LIMIT and r.certified_gap == 1.0


def test_global_time_limit_work_clock_deterministic():
    prob = TabulatedProblem(np.arange(40, dtype=float).reshape(4, 10) % 7, stepped=True)
    runs = [run_sam(prob, strategy="ASBP", clock="work", seconds_per_node=1e-3, global_time_limit=0.02)
            for _ in range(2)]
    assert runs[0].status == runs[1].status
    assert runs[0].objective_ub == runs[1].objective_ub and runs[0].final_D == runs[1].final_D


class Infeasible(TwoStageProblem):
    def scenarios(self):
        return [0]

    def build_master(self, D):
        prob = TabulatedProblem([[1.0]])
        mm = prob.build_master(D)
        mm.model.add_constr({mm.x_vars[0]: 1.0}, "<=", 0.0, "kill")
        return mm

    def build_second_stage(self, x, s):
        raise AssertionError("unreachable")

    def first_stage_cost(self, x):
        return 0.0


def test_master_infeasible_is_hard_error():
    with pytest.raises(MasterInfeasibleError):
        run_sam(Infeasible())


@pytest.mark.parametrize("backend", ["embedded", "highs"])
def test_backends_agree(backend):
    prob = TabulatedProblem([[3, 8, 1], [6, 2, 5]], f=[1, 2], stepped=True)
    r = run_sam(prob, strategy="ASBP", master_backend=backend, second_stage_backend=backend)
    assert r.objective_ub == pytest.approx(prob.optimum())


def test_certified_gap_matches_bounds():
    prob = TabulatedProblem([[3, 8, 1], [6, 2, 5]], f=[1, 2])
    r = run_sam(prob, strategy="SRP", target_gap=0.1)
    best_lb = max(log.master_lb for log in r.logs)
    assert r.certified_gap == pytest.approx(relative_gap(r.objective_ub, min(best_lb, r.objective_ub)))
