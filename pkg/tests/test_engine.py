import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcmndp.engine import (
    RULES,
    VARIANTS,
    DirectionRule,
    InfeasibleInstanceError,
    SolverConfig,
    StepRule,
    beta_update,
    compute_upper_bound,
    deflection_sigma,
    direction,
    initial_multipliers,
    run,
    step_length,
    update_multipliers,
)
from dcmndp.instance import GeneratorParams, generate_random, make_instance, tri3
from conftest import small_instance

EMPTY = make_instance(3, [(0, 1, [(5, 10)]), (1, 2, [(5, 10)])], [])


def test_initial_multipliers():
    assert list(initial_multipliers(3)) == [0, 0, 0]
    assert initial_multipliers(0).shape == (0,)


def test_sigma_examples():
    d_prev = np.array([2.0, 0.0])  # |d|^2 = 4
    assert deflection_sigma(DirectionRule("SG2"), np.array([-1.0, 5.0]), d_prev) == 0.75
    assert deflection_sigma(DirectionRule("SG3"), np.array([0.5, 1.0]), d_prev) == 0
    assert deflection_sigma(DirectionRule("SG5"), np.array([3.0, 0.0]), d_prev) == 1.5
    assert deflection_sigma(DirectionRule("SG4"), np.array([3.0, 0.0]), d_prev) == 0.8
    assert deflection_sigma(DirectionRule("SG1"), np.array([-3.0, 0.0]), d_prev) == 0
    with pytest.raises(ValueError):
        deflection_sigma(DirectionRule("SG6"), np.ones(2), d_prev)


def test_direction_examples():
    g, other = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert np.allclose(direction(DirectionRule("SG6", 0.7), 1, g, other, other), [0.7, 0.3])
    assert np.allclose(direction(DirectionRule("SG4"), 1, g, other, other), [1, 0.8])
    for q in range(3):
        assert np.array_equal(direction(DirectionRule("SG1"), q, g, other, other), g)
    assert np.array_equal(direction(DirectionRule("SG5"), 0, g, None, None), g)


def test_tiny_direction_falls_back_to_subgradient():
    g = np.array([1.0, 0.0])
    d = direction(DirectionRule("SG6", 0.5), 1, g, -g)
    assert np.array_equal(d, g)


def test_step_length_examples():
    assert step_length(2, 100, 60, np.array([4.0, 0.0])) == 5
    assert step_length(2, 100, 100, np.array([4.0, 0.0])) == 0
    assert math.isclose(step_length(0.01, 18, 10, np.array([2.0, 0.0])), 0.02)


def test_beta_examples():
    assert beta_update(StepRule("R1"), 2, False, 1, 10, 15) == 1
    assert beta_update(StepRule("R1"), 2, True, 1, 10, 15) == 2
    assert beta_update(StepRule("R1"), 1e-8, False, 1, 10, 15) == 1e-8
    assert beta_update(StepRule("R2"), 2, False, 20, 10, 15) == 1
    assert beta_update(StepRule("R2"), 2, False, 19, 10, 15) == 2
    assert beta_update(StepRule("R3"), 2, False, 30, 10, 15) == 1
    assert beta_update(StepRule("R6"), 0.3, False, 7, 10, 15) == 1.99
    assert beta_update(StepRule("R4"), 2, True, 0, 10, 15) == 0.01
    assert beta_update(StepRule("R5"), 2, True, 0, 10, 15) == 0.1


def test_update_examples():
    w = np.array([0.0, 0.0, 2.0])
    assert list(update_multipliers(w, 0.5, np.array([0.0, -6.0, 2.0]))) == [0, 0, 3]
    assert list(update_multipliers(w, 0.0, np.array([1.0, 1.0, 1.0]))) == [0, 0, 2]
    assert list(update_multipliers(np.zeros(3), 1.0, np.array([0.0, 0.0, 2.0]))) == [0, 0, 2]


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig.of("SG7")
    with pytest.raises(ValueError):
        SolverConfig.of("SG1", "R9")
    assert SolverConfig.of("sg3", "r4").direction.variant == "SG3"


def test_upper_bound_examples():
    assert compute_upper_bound(tri3()) == (18, True)
    assert compute_upper_bound(EMPTY) == (0, True)
    with pytest.raises(InfeasibleInstanceError):
        compute_upper_bound(make_instance(2, [(0, 1, [(5, 10)])], [(0, 1, 7)]))


def test_empty_problem_stops_immediately():
    report = run(EMPTY)
    assert report.stop_reason == "zero_gradient"
    assert report.best_theta == 0 and report.iterations == 1


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("rule", RULES)
def test_tri3_bounds(variant, rule):
    report = run(tri3(), SolverConfig.of(variant, rule))
    assert 10 <= report.best_theta <= 18
    assert report.stop_reason in {"stall", "gap_closed", "zero_gradient"}
    assert report.trajectory[0].theta == 10


def test_run_is_deterministic():
    inst = generate_random(GeneratorParams(10, 15, seed=1))
    a = run(inst, SolverConfig.of("SG3", "R1"))
    b = run(inst, SolverConfig.of("SG3", "R1"))
    assert [r.theta for r in a.trajectory] == [r.theta for r in b.trajectory]
    assert np.array_equal(a.best_w, b.best_w)


def test_callback_sees_every_record():
    seen = []
    report = run(tri3(), SolverConfig.of("SG2", "R1"), on_iteration=seen.append)
    assert seen == report.trajectory


def test_iteration_cap():
    inst = generate_random(GeneratorParams(10, 15, seed=1))
    report = run(inst, SolverConfig.of("SG1", "R4", max_iterations=5))
    assert report.stop_reason == "iteration_cap" and report.iterations == 5


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), variant=st.sampled_from(VARIANTS), rule=st.sampled_from(RULES))
def test_run_invariants(seed, variant, rule):
    inst = small_instance(seed, 6, 8, 3)
    try:
        ub, feasible = compute_upper_bound(inst)
    except InfeasibleInstanceError:
        return
    report = run(inst, SolverConfig.of(variant, rule, keep_vectors=True))
    bests = [r.best_theta for r in report.trajectory]
    assert all(a <= b for a, b in zip(bests, bests[1:]))
    assert report.best_theta == max(r.theta for r in report.trajectory)
    if feasible:
        assert report.best_theta <= ub + 1e-6
    if variant == "SG1":
        for r in report.trajectory[:-1]:
            assert np.array_equal(r.direction, r.subgradient)
