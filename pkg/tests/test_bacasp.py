import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_sam.apps.bacasp import (
    BacaspInstance, BacaspProblem, bacasp_generate, build_master, build_second_stage_with_vars,
    deviation_vectors, enumerate_scenarios, greedy_schedule, group_bounds, slack_reduction_init,
    slack_score,
)
from robust_sam.engine import init_subset
from robust_sam.mip import check_feasible, evaluate
from robust_sam.solver import EventKind, HighsSession, solve

SCENARIO_COUNTS = {6: 125, 7: 175, 8: 245, 9: 343, 10: 441, 11: 567, 12: 729, 13: 891, 14: 1089, 15: 1331}
TINY = dict(sections=6, cranes=2, cargo=(5, 15), lengths=(2, 3), arrival_max=3, delay=(1, 2))


def highs_solve(model):
    s = HighsSession(model)
    while not s.finished:
        s.step()
    return s


def one_vessel(arrival=0, nc=1, cargo=20):
    return BacaspInstance(H=(2,), Q=(cargo,), A=(arrival,), A_hat=(0,), NC=(nc,), crane_start=(0,),
                          crane_end=(2,), rate=(10.0,), J=2, M=8, F=1)


@pytest.mark.parametrize("n,count", sorted(SCENARIO_COUNTS.items()))
def test_scenario_counts(n, count):
    assert len(enumerate_scenarios(n, [0] * n, [1] * n)) == count


def independent_budget_ok(delta, n):
    r = int(n / 3 + 0.5)
    groups = [delta[:r], delta[r:2 * r], delta[2 * r:]]
    return all(sum(v != 0 for v in g) <= 1 for g in groups) and set(delta) <= {0, 0.5, 1}


@pytest.mark.parametrize("n", range(3, 13))
def test_deviation_budget(n):
    vecs = deviation_vectors(n)
    assert all(independent_budget_ok(v, n) for v in vecs)
    assert vecs[0] == (0.0,) * n and len(set(vecs)) == len(vecs)
    assert vecs == sorted(vecs)


def test_group_rule_and_half_delays():
    assert [len(g) for g in group_bounds(7)] == [2, 2, 3]
    assert [len(g) for g in group_bounds(8)] == [3, 3, 2]
    arr = enumerate_scenarios(3, [0, 0, 0], [3, 3, 3])
    assert (2, 0, 0) in arr and (3, 0, 0) in arr  # half of 3 rounds up
    with pytest.raises(ValueError):
        group_bounds(2)


@pytest.mark.parametrize("arrival", [0, 3])
def test_one_vessel_completion(arrival):
    inst = one_vessel(arrival)
    mm = build_master(inst, [0])
    r = solve(mm.model)
    assert r.status is EventKind.OPTIMAL and r.ub == pytest.approx(2.0)
    x = np.array([r.incumbent[v] for v in mm.x_vars])
    m, v = build_second_stage_with_vars(inst, x, 0)
    rr = solve(m)
    assert rr.ub == pytest.approx(2.0) and rr.incumbent[v.c[0]] == arrival + 2


def test_no_cranes_infeasible():
    inst = one_vessel(nc=0)
    mm = build_master(inst, [])
    x = np.array([solve(mm.model).incumbent[v] for v in mm.x_vars])
    m, _ = build_second_stage_with_vars(inst, x, 0)
    assert solve(m).status is EventKind.INFEASIBLE


def test_two_vessel_master_matches_oracle():
    inst = BacaspInstance(H=(2, 2), Q=(10, 20), A=(0, 1), A_hat=(0, 0), NC=(1, 1), crane_start=(0,),
                          crane_end=(3,), rate=(10.0,), J=3, M=6, F=1)
    mm = build_master(inst, [0])
    assert solve(mm.model).ub == pytest.approx(highs_solve(mm.model).ub)


def test_empty_master_is_zero():
    inst = bacasp_generate(3, 0, **TINY)
    assert solve(build_master(inst, []).model).ub == 0.0


def test_solved_master_disjunction_and_schedule_invariants():
    inst = bacasp_generate(3, 2, **TINY)
    mm = build_master(inst, [0])
    sess = highs_solve(mm.model)
    vals = sess.incumbent
    names = {v.name: v.id for v in mm.model.vars}
    for k, l in itertools.combinations(range(inst.N), 2):
        keys = [f"e_{l}_{k}", f"e_{k}_{l}", f"u_{l}_{k}", f"u_{k}_{l}"]
        assert sum(round(vals[names[n]]) for n in keys) == 1
    x = np.array([vals[v] for v in mm.x_vars])
    for s in range(3):
        m, v = build_second_stage_with_vars(inst, x, s)
        inc = highs_solve(m).incumbent
        assert check_feasible(m, inc)
        A = inst.arrivals[s]
        for k in range(inst.N):
            assert inc[v.t[k]] >= A[k] - 1e-9
        for g in range(inst.C):
            for j in range(inst.M):
                assert sum(round(inc[v.d[g, k, j]]) for k in range(inst.N)) <= 1
        identity = sum(inc[v.c[k]] - A[k] for k in range(inst.N))
        assert evaluate(m.objective, inc) == identity


def test_slack_reduction_examples():
    assert slack_reduction_init(one_vessel()) == 0
    assert slack_score((0, 5)) < slack_score((0, 10))
    # delaying vessel 0 by 0, 2 or 4 periods gives spreads 10, 8, 6
    inst = BacaspInstance(H=(2, 2, 2), Q=(10, 10, 10), A=(0, 4, 10), A_hat=(4, 0, 0), NC=(1, 1, 1),
                          crane_start=(0,), crane_end=(5,), rate=(10.0,), J=5, M=20, F=1)
    chosen = slack_reduction_init(inst)
    assert inst.arrivals[chosen] == (4, 4, 10)
    assert chosen == inst.arrivals.index((4, 4, 10))


def test_slack_reduction_full_scan():
    inst = bacasp_generate(6, 3)
    chosen = slack_reduction_init(inst)
    scores = [float(np.sum(np.diff(np.sort(np.array(a))))) for a in inst.arrivals]
    assert len(scores) == 125
    assert scores[chosen] == min(scores) and chosen == scores.index(min(scores))
    assert init_subset(BacaspProblem(inst), "Hint") == [chosen]


def test_generator():
    a, b = bacasp_generate(4, 11), bacasp_generate(4, 11)
    assert a == b and a.dumps() == b.dumps()
    assert len(set(a.rate)) == 1 and a.J + 1 == 10 and a.C == 4
    assert set(a.NC) == {2} and a.F == 1
    assert all(2 <= h <= 4 for h in a.H) and all(10 <= q <= 40 for q in a.Q)
    assert a.M == 2 * 4 + max(a.A_hat) + math.ceil(sum(a.Q) / 10) + 4


@pytest.mark.parametrize("seed", [0, 1])
def test_generated_nominal_is_feasible(seed):
    inst = bacasp_generate(3, seed)
    s = highs_solve(build_master(inst, [0]).model)
    assert s._terminal.kind is EventKind.OPTIMAL


def test_json_round_trip(tmp_path):
    inst = bacasp_generate(5, 2, n_scenarios=7)
    path = tmp_path / "b.json"
    inst.save(path)
    again = BacaspInstance.load(path)
    assert again == inst and again.arrivals == inst.arrivals and again.dumps() == inst.dumps()
    assert set(inst.to_dict()) == {"vessels", "cranes", "horizon", "safety", "berth_sections", "uncertainty"}


def test_sampled_scenarios_keep_nominal():
    inst = bacasp_generate(4, 5, n_scenarios=6)
    assert len(inst.arrivals) == 6 and inst.arrivals[0] == tuple(inst.A)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 500))
def test_greedy_is_feasible_upper_bound(seed):
    inst = bacasp_generate(3, seed, **TINY)
    mm = build_master(inst, [])
    x = np.array([highs_solve(mm.model).incumbent[v] for v in mm.x_vars])
    for s in range(min(3, len(inst.arrivals))):
        g = greedy_schedule(inst, x, s)
        m, _ = build_second_stage_with_vars(inst, x, s)
        exact = highs_solve(m)
        if g.ub < math.inf:
            assert check_feasible(m, g.incumbent) and g.ub >= exact.ub - 1e-9
