import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcmndp.instance import make_instance, terminal_set, tri3
from dcmndp.lagrangian import (
    NO_FACILITY,
    all_pairs_shortest_paths,
    compute_subgradient,
    edge_flows,
    evaluate_dual,
    installed_capacity,
    reduced_facility_costs,
    solve_ap_y,
    solve_ap_z,
)
from conftest import random_multipliers, small_instance

EMPTY = make_instance(3, [(0, 1, [(5, 10)]), (1, 2, [(5, 10)])], [])


def test_reduced_costs():
    inst = tri3()
    assert np.array_equal(reduced_facility_costs(inst, np.zeros(3)), inst.cost_matrix)
    c = reduced_facility_costs(inst, [0, 0, 2])
    assert c[2, 1] == -2
    assert reduced_facility_costs(inst, [1, 0, 0])[0, 0] == 5


def test_multipliers_must_be_nonnegative_and_sized():
    with pytest.raises(ValueError):
        reduced_facility_costs(tri3(), [0, -1, 0])
    with pytest.raises(ValueError):
        reduced_facility_costs(tri3(), [0, 0])


def test_shortest_paths_tri3():
    sp = all_pairs_shortest_paths(tri3(), [1, 1, 3])
    assert sp.dist[0, 2] == 2
    assert sp.path(0, 2) == [0, 1]
    assert sp.node_path(0, 2) == [0, 1, 2]


def test_zero_weights_prefer_fewest_edges():
    sp = all_pairs_shortest_paths(tri3(), np.zeros(3))
    assert not sp.dist.any()
    assert sp.path(0, 2) == [2]


def test_ap_z_tri3():
    inst = tri3()
    theta_z, routing = solve_ap_z(inst, all_pairs_shortest_paths(inst, [1, 1, 3]))
    assert theta_z == 14 and routing == [[0, 1]]
    assert solve_ap_z(inst, all_pairs_shortest_paths(inst, np.zeros(3)))[0] == 0
    assert solve_ap_z(EMPTY, all_pairs_shortest_paths(EMPTY, np.zeros(2))) == (0.0, [])


def test_ap_y_tri3():
    inst = tri3()
    sol = solve_ap_y(inst, reduced_facility_costs(inst, np.zeros(3)), {0, 2})
    assert sol.theta_y == 10 and sol.exact
    assert list(sol.selection) == [NO_FACILITY, NO_FACILITY, 0]
    sol = solve_ap_y(inst, reduced_facility_costs(inst, [0, 0, 2]), {0, 2})
    assert sol.theta_y == -2
    assert list(sol.selection) == [NO_FACILITY, NO_FACILITY, 1]


def test_ap_y_without_terminals_is_pure_inspection():
    inst = tri3()
    sol = solve_ap_y(inst, reduced_facility_costs(inst, np.zeros(3)), set())
    assert sol.theta_y == 0 and (sol.selection == NO_FACILITY).all()


def test_dual_tri3_at_zero():
    ev = evaluate_dual(tri3(), np.zeros(3))
    assert ev.theta == 10 and ev.theta_y == 10 and ev.theta_z == 0
    assert list(ev.subgradient) == [0, 0, 2]
    assert ev.routing == [[2]]


def test_dual_empty_problem():
    ev = evaluate_dual(EMPTY, np.zeros(2))
    assert ev.theta == 0 and not ev.subgradient.any()


def test_subgradient_arithmetic():
    inst = make_instance(2, [(0, 1, [(5, 10), (10, 18)])], [(0, 1, 7)])
    assert list(compute_subgradient(inst, [[0]], [0])) == [2]
    assert list(compute_subgradient(inst, [[]], [NO_FACILITY])) == [0]
    assert list(compute_subgradient(inst, [[]], [1])) == [-10]
    assert list(installed_capacity(inst, np.array([1]))) == [10]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(3, 12))
def test_dual_pieces_are_consistent(seed, n):
    inst = small_instance(seed, n, n + 3, 3)
    w = random_multipliers(inst, np.random.default_rng(seed))
    ev = evaluate_dual(inst, w)
    sp = ev.shortest_paths
    # vectorized flows agree with path-by-path accumulation
    flows = edge_flows(inst, sp)
    assert np.allclose(flows - installed_capacity(inst, ev.selection), ev.subgradient)
    assert np.allclose(compute_subgradient(inst, ev.routing, ev.selection), ev.subgradient)
    # each reconstructed path has the reported length
    for com, path in zip(inst.commodities, ev.routing):
        assert math.isclose(sum(w[e] for e in path), sp.dist[com.source, com.sink], abs_tol=1e-9)
    # theta splits into the two subproblem values
    c = reduced_facility_costs(inst, w)
    chosen = [c[e, l] for e, l in enumerate(ev.selection) if l != NO_FACILITY]
    assert math.isclose(sum(chosen), ev.theta_y, abs_tol=1e-9)
    assert math.isclose(ev.theta, ev.theta_y + ev.theta_z, abs_tol=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(3, 12))
def test_distance_matrix_is_a_metric(seed, n):
    inst = small_instance(seed, n, n + 4, 1)
    w = random_multipliers(inst, np.random.default_rng(seed))
    d = all_pairs_shortest_paths(inst, w).dist
    assert np.allclose(d, d.T)
    assert not np.diag(d).any()
    assert (d[:, :, None] <= d[:, None, :] + d.T[None, :, :] + 1e-9).all()
    for e in inst.edges:
        assert d[e.u, e.v] <= w[e.id] + 1e-12


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(3, 12))
def test_cuts_only_strengthen(seed, n):
    inst = small_instance(seed, n, n + 3, 2)
    c = reduced_facility_costs(inst, random_multipliers(inst, np.random.default_rng(seed)))
    plain = solve_ap_y(inst, c, set())
    assert math.isclose(plain.theta_y, np.minimum(c.min(axis=1), 0).sum(), abs_tol=1e-9)
    cut = solve_ap_y(inst, c, terminal_set(inst))
    assert cut.theta_y >= plain.theta_y - 1e-9
    covered = {v for e in inst.edges if cut.selection[e.id] != NO_FACILITY for v in (e.u, e.v)}
    assert terminal_set(inst) <= covered


def test_large_instance_is_fast():
    from time import perf_counter

    from dcmndp.instance import GeneratorParams, generate_random

    inst = generate_random(GeneratorParams(50, 100, 3, seed=3))
    w = np.random.default_rng(0).uniform(0, 5, inst.m)
    t = perf_counter()
    ev = evaluate_dual(inst, w)
    assert ev.exact_y
    assert perf_counter() - t < 2.0
