import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcmndp.engine import SolverConfig, run
from dcmndp.instance import make_instance, terminal_set, tri3
from dcmndp.lagrangian import reduced_facility_costs
from dcmndp.oracles import (
    OracleSizeError,
    brute_force_ap_y,
    brute_force_opt,
    brute_force_shortest_paths,
    brute_force_theta,
    check_concavity,
    check_supergradient,
    check_weak_duality,
    simple_paths,
)
from conftest import small_instance


def test_shortest_path_oracle_tri3():
    assert brute_force_shortest_paths(tri3(), [1, 1, 3])[0, 2] == 2
    assert not brute_force_shortest_paths(tri3(), np.zeros(3)).any()
    assert sorted(simple_paths(tri3(), 0, 2)) == [[0, 1], [2]]


def test_ap_y_oracle_tri3():
    inst = tri3()
    assert brute_force_ap_y(inst, reduced_facility_costs(inst, np.zeros(3)), {0, 2}) == 10
    assert brute_force_ap_y(inst, reduced_facility_costs(inst, [0, 0, 2]), {0, 2}) == -2
    assert brute_force_ap_y(inst, reduced_facility_costs(inst, np.zeros(3)), set()) == 0


def test_theta_oracle_tri3():
    assert brute_force_theta(tri3(), np.zeros(3), {0, 2}) == 10
    # edge (0,2) at its top facility: 18 - 3*10 = -12 covers both terminals; routing 7*2
    assert brute_force_theta(tri3(), [1, 1, 3], {0, 2}) == -12 + 14


def test_opt_oracle():
    assert brute_force_opt(tri3()) == 18
    assert brute_force_opt(make_instance(2, [(0, 1, [(5, 10)])], [])) == 0
    assert brute_force_opt(make_instance(2, [(0, 1, [(5, 10)])], [(0, 1, 7)])) == math.inf


def test_opt_oracle_uses_split_flow():
    # 7 units over two parallel routes of capacity 5 each
    inst = make_instance(3, [(0, 1, [(5, 4)]), (1, 2, [(5, 4)]), (0, 2, [(5, 4), (10, 100)])],
                         [(0, 2, 7)])
    assert brute_force_opt(inst) == 12


def test_size_guards():
    big = small_instance(0, 12, 14, 1)
    with pytest.raises(OracleSizeError):
        brute_force_shortest_paths(big, np.zeros(big.m))
    with pytest.raises(OracleSizeError):
        brute_force_opt(big)
    wide = small_instance(1, 9, 20, 3)
    with pytest.raises(OracleSizeError):
        brute_force_ap_y(wide, wide.cost_matrix, set())


def test_supergradient_examples():
    assert check_supergradient(tri3(), np.zeros(3), np.zeros(3))
    assert check_supergradient(tri3(), np.zeros(3), [0, 0, 1])


def test_weak_duality_check():
    report = run(tri3(), SolverConfig.of("SG1", "R1"))
    assert check_weak_duality(report, brute_force_opt(tri3()))
    assert check_weak_duality(report, report.upper_bound)
    closed = run(tri3(), SolverConfig.of("SG1", "R1", upper_bound=10))
    assert closed.stop_reason == "gap_closed"
    assert check_weak_duality(closed, closed.upper_bound)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_bound_never_exceeds_optimum(seed):
    inst = small_instance(seed, 4, 5, 2, k=2)
    opt = brute_force_opt(inst)
    assert brute_force_theta(inst, np.zeros(inst.m), terminal_set(inst)) <= opt + 1e-9
    rng = np.random.default_rng(seed)
    for _ in range(5):
        assert brute_force_theta(inst, rng.uniform(0, 4, inst.m), terminal_set(inst)) <= opt + 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), lam=st.floats(0, 1))
def test_concavity(seed, lam):
    inst = small_instance(seed, 7, 10, 3)
    rng = np.random.default_rng(seed)
    assert check_concavity(inst, rng.uniform(0, 3, inst.m), rng.uniform(0, 3, inst.m), lam)
