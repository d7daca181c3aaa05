import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_sam.apps.rclrp import (
    RclrpGenParams, RclrpInstance, RclrpProblem, build_master, build_second_stage,
    build_second_stage_with_block, generate_rclrp, rclrp_heuristic, tours,
)
from robust_sam.mip import check_feasible, evaluate
from robust_sam.solver import SolveParams, brute_force_solve, solve


def micro(demand=3.0) -> RclrpInstance:
    return RclrpInstance(
        warehouses=("w",), customers=("j",),
        c=np.array([[0.0, 2.0], [2.0, 0.0]]), alpha=np.array([[0.0, 1.0], [1.0, 0.0]]),
        gamma=np.array([[0.0, 0.5], [0.5, 0.0]]),
        e=np.array([10.0]), e_rec=np.array([15.0]), d=np.array([1.0]), d_rec=np.array([1.5]),
        A=np.array([10.0]), L=10.0, F=5.0, demands=np.array([[demand]]),
    )


@pytest.mark.parametrize("x,expected", [([1.0, 3.0], 12.5), ([0.0, 0.0], 32.0)])
def test_micro_second_stage(x, expected):
    ref = brute_force_solve(build_second_stage(micro(), np.array(x), 0))
    assert ref.opt == pytest.approx(expected, abs=1e-9)
    assert solve(build_second_stage(micro(), np.array(x), 0)).ub == pytest.approx(expected, abs=1e-9)


def test_zero_demand_costs_nothing():
    m, block = build_second_stage_with_block(micro(0.0), np.array([1.0, 3.0]), 0)
    r = solve(m)
    assert r.ub == pytest.approx(0.0)
    assert all(r.incumbent[v] == 0 for v in block.r.ravel())


def test_master_structure_and_optimum():
    inst = micro()
    empty = build_master(inst, [])
    assert empty.model.num_vars == 3
    assert solve(empty.model).ub == 0.0
    mm = build_master(inst, [0])
    assert mm.model.num_vars == 14
    assert brute_force_solve(mm.model).opt == pytest.approx(25.5)
    assert solve(mm.model).ub == pytest.approx(25.5)


def test_heuristic_contract():
    x = np.array([1.0, 3.0])
    h = rclrp_heuristic(micro(), x, 0, budget=5.0)
    assert (h.ub, h.lb) == (pytest.approx(12.5), pytest.approx(12.5))
    h0 = rclrp_heuristic(micro(), x, 0, budget=0.0)
    assert h0.ub == math.inf and h0.lb == 0.0


def test_generator_properties():
    p = RclrpGenParams(3, 5, 4, 2)
    a, b = generate_rclrp(p), generate_rclrp(p)
    assert a.dumps() == b.dumps()
    assert np.all(a.e_rec / a.e == 1.5) and np.all(a.d_rec / a.d == 1.5)
    big = generate_rclrp(RclrpGenParams(5, 20, 64, 1))
    assert abs(np.mean(big.demands == 0) - 0.03) <= 0.02
    assert np.all(big.demands <= big.L)


def test_json_round_trip(tmp_path):
    inst = generate_rclrp(RclrpGenParams(2, 4, 3, 5))
    path = tmp_path / "i.json"
    inst.save(path)
    again = RclrpInstance.load(path)
    assert again.dumps() == inst.dumps()
    assert set(__import__("json").loads(inst.dumps())) == {
        "warehouses", "customers", "arcs", "costs", "capacities", "scenarios"}


def test_instance_validation():
    with pytest.raises(ValueError):
        RclrpInstance(("w",), ("j",), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)),
                      np.array([1.0]), np.array([1.0]), np.array([1.0]), np.array([2.0]),
                      np.array([5.0]), 1.0, 1.0, np.array([[0.5]]))


@settings(max_examples=8, deadline=None)
@given(st.integers(1, 1000), st.integers(0, 2))
def test_incumbent_invariants(instance_number, opened):
    inst = generate_rclrp(RclrpGenParams(2, 3, 2, instance_number))
    w0 = np.array([1.0 if i < opened else 0.0 for i in range(2)])
    a0 = w0 * inst.A * 0.3
    x = np.concatenate([w0, a0])
    for s in range(inst.n_scenarios):
        m, block = build_second_stage_with_block(inst, x, s)
        r = solve(m)
        vals = r.incumbent
        assert check_feasible(m, vals)
        cycles = tours(inst, block, vals)
        for cyc in cycles:
            assert sum(v < inst.n_wh for v in cyc) == 1
        vehicles = sum(vals[block.r[i, inst.n_wh + j]] for i in range(inst.n_wh) for j in range(inst.n_cust))
        assert round(vehicles) == len(cycles)
        for i in range(inst.n_wh):
            if w0[i] == 1:
                assert vals[block.w[i]] == 1 and vals[block.a[i]] >= a0[i] - 1e-9


def test_master_second_stage_consistency():
    inst = generate_rclrp(RclrpGenParams(2, 3, 3, 4))
    prob = RclrpProblem(inst)
    D = [0, 2]
    mm = build_master(inst, D)
    r = solve(mm.model, SolveParams(branching="pseudocost"))
    x = np.array([r.incumbent[v] for v in mm.x_vars])
    z = r.incumbent[mm.z_var]
    for s in D:
        assert solve(prob.build_second_stage(x, s)).ub <= z + 1e-6
    assert evaluate(mm.f_expr, r.incumbent) == pytest.approx(prob.first_stage_cost(x))
