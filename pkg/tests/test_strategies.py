import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_ctx, tabulated_case
from robust_sam.apps.tabulated import TabulatedProblem
from robust_sam.engine import SecondStageInfeasibleError, adjusted_bound
from robust_sam.strategies import asbp_find, isam_find, srp_find

Q = [5.0, 9.0, 7.0]


def counting(ctx):
    """Record every scenario for which an exact second-stage session is opened."""
    calls = []
    orig_session = ctx.exact_session
    ctx.exact_session = lambda s, start=None: calls.append(s) or orig_session(s, start)
    return calls


# ISAM

def test_isam_exact_heuristic():
    ctx = make_ctx(TabulatedProblem([Q], heuristic_ub=[Q], heuristic_lb=[Q]), [], 0.0)
    assert isam_find(ctx).scenario == 1


def test_isam_loose_heuristic_trace():
    ctx = make_ctx(TabulatedProblem([Q], heuristic_ub=[[10, 9, 7]]), [], 0.0)
    calls = counting(ctx)
    r = isam_find(ctx)
    assert r.scenario == 1 and calls == [0, 1] and r.bound == 9.0


def test_isam_single_scenario():
    ctx = make_ctx(TabulatedProblem([[3.0]], heuristic_ub=[[4.0]]), [], 0.0)
    calls = counting(ctx)
    assert isam_find(ctx).scenario == 0 and calls == [0]


def test_isam_ties_lowest_id():
    ctx = make_ctx(TabulatedProblem([[4, 4, 4]]), [], 0.0)
    assert isam_find(ctx).scenario == 0


# SRP

@pytest.mark.parametrize("D,z,expected", [([0], 6.0, 1), ([0], 9.5, 0), ([0, 1], 6.0, 2)])
def test_srp_examples(D, z, expected):
    ctx = make_ctx(TabulatedProblem([Q]), D, z)
    assert srp_find(ctx).scenario == expected


def test_srp_scans_only_outside_d():
    ctx = make_ctx(TabulatedProblem([Q]), [0, 1], 6.0)
    calls = counting(ctx)
    assert srp_find(ctx).scenario == 2 and calls == [2]


# ASBP

def test_asbp_everything_below_bound_returns_min_d():
    ctx = make_ctx(TabulatedProblem([Q], heuristic_ub=[Q], heuristic_lb=[Q]), [0], 9.5)
    assert asbp_find(ctx).scenario == 0


def test_asbp_empty_d_certifies_with_none():
    ctx = make_ctx(TabulatedProblem([Q], heuristic_ub=[Q], heuristic_lb=[Q]), [], 9.5)
    r = asbp_find(ctx)
    assert r.scenario is None and r.bound >= 9.0


def test_asbp_bracket_prunes_without_exact_solve():
    ctx = make_ctx(TabulatedProblem([[8.5, 5.0]], heuristic_ub=[[9, 7]], heuristic_lb=[[8, 2]]), [], 6.0)
    calls = counting(ctx)
    r = asbp_find(ctx)
    assert r.scenario == 0 and calls == []
    assert r.z_adjusted == 6.0


def test_asbp_rho_exhaustion_returns_argmax():
    from robust_sam.solver import WorkClock
    prob = TabulatedProblem([[4.0, 2.0]], heuristic_ub=[[5.0, 3.0]], heuristic_lb=[[0.0, 0.0]], stepped=True)
    ctx = make_ctx(prob, [], 1.0, clock=WorkClock(1e-3), tl_min=1e-3, tl_linear=0.0)
    calls = counting(ctx)
    r = asbp_find(ctx)
    assert r.scenario == 0 and calls == [0]
    assert r.bounds[0]["rho"] <= 0 and r.bounds[0]["lb"] < r.bounds[0]["ub"]


def test_asbp_no_tl_runs_to_proof():
    prob = TabulatedProblem([[4.0, 2.0]], heuristic_ub=[[5.0, 3.0]], stepped=True)
    r = asbp_find(make_ctx(prob, [], 1.0, use_tl=False))
    assert r.scenario == 0 and r.bounds[0]["lb"] == r.bounds[0]["ub"] == 4.0


def test_asbp_no_zb_runs_heuristic_on_all_scenarios():
    prob = TabulatedProblem([Q], heuristic_ub=[Q], heuristic_lb=[Q])
    r = asbp_find(make_ctx(prob, [1], 9.0, use_zb=False))
    assert set(r.bounds) == {0, 1, 2} and r.z_adjusted == 0.0
    assert r.scenario == 1


def test_infeasible_second_stage_in_d_is_error():
    prob = TabulatedProblem([[math.inf, 1.0]])
    prob.build_second_stage = lambda x, s: _infeasible()
    with pytest.raises(SecondStageInfeasibleError):
        isam_find(make_ctx(prob, [0, 1], 1.0))


def _infeasible():
    from robust_sam.mip import Model
    m = Model()
    y = m.add_var("y", "binary")
    m.add_constr({y: 1}, ">=", 2)
    return m


# Oracle-checked contracts on random tabulated cases

def check_contracts(seed):
    prob, D, z, p, P, toggles = tabulated_case(seed)
    q = prob.table[0]
    qmax = float(q.max())
    ctx = make_ctx(prob, D, z, p, P, clock=None, **toggles)
    r = isam_find(make_ctx(prob, D, z, p, P))
    assert q[r.scenario] == pytest.approx(qmax, abs=1e-6)
    r = srp_find(make_ctx(prob, D, z, p, P))
    if r.scenario is None or r.scenario in D:
        assert qmax <= z + 1e-6
    else:
        assert q[r.scenario] > z - 1e-6
    r = asbp_find(ctx)
    # with ZB off the search compares against 0, but the certificate is still the true z'
    z_adj = adjusted_bound(z, ctx.ms.f_x, p, P)
    if r.scenario is None or r.scenario in D:
        assert qmax <= z_adj + 1e-6
        assert qmax <= r.bound + 1e-6 <= z_adj + 2e-6
    for s, b in r.bounds.items():
        assert b["lb"] - 1e-6 <= q[s] <= b["ub"] + 1e-6


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_strategy_contracts(seed):
    check_contracts(seed)


def test_adjusted_bound_examples():
    assert adjusted_bound(50, 10, 0, 0.1) == pytest.approx(56.666666666666664)
    assert adjusted_bound(7, 3, 0.2, 0.2) == pytest.approx(7)
    assert adjusted_bound(0, 0, 0.0, 0.05) == 0
    with pytest.raises(ValueError):
        adjusted_bound(1, 1, 0.2, 0.1)


@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0, 0.99), st.floats(0, 1))
def test_adjusted_bound_dominates_z(z, f, P, frac):
    p = P * frac
    assert adjusted_bound(z, f, p, P) >= z * (1 - 1e-12)
