"""Deflected subgradient ascent on the Lagrangian dual.

Direction rules SG1-SG6 and step-length parameter rules R1-R6 plug into a
single loop: evaluate the dual at ``w``, stop on a vanishing subgradient,
otherwise move along the (deflected) direction with a Polyak-type step
``beta * (UB - theta) / |d|^2`` and project back onto ``w >= 0``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .instance import Instance
from .lagrangian import all_pairs_shortest_paths, edge_flows, evaluate_dual

VARIANTS = ("SG1", "SG2", "SG3", "SG4", "SG5", "SG6")
RULES = ("R1", "R2", "R3", "R4", "R5", "R6")
CONSTANT_BETA = {"R4": 0.01, "R5": 0.1, "R6": 1.99}
INITIAL_BETA = 2.0
IMPROVEMENT_TOL = 1e-6
GAP_TOL = 1e-9


class InfeasibleInstanceError(RuntimeError):
    """No facility design can route some commodity's demand."""


@dataclass(frozen=True)
class DirectionRule:
    variant: str = "SG1"
    alpha: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, "variant", self.variant.upper())
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown direction rule {self.variant!r}")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")


@dataclass(frozen=True)
class StepRule:
    rule: str = "R1"

    def __post_init__(self):
        object.__setattr__(self, "rule", self.rule.upper())
        if self.rule not in RULES:
            raise ValueError(f"unknown step rule {self.rule!r}")

    @property
    def initial_beta(self) -> float:
        return CONSTANT_BETA.get(self.rule, INITIAL_BETA)

    def period(self, n: int, m: int) -> int | None:
        """Halving period of the Held-Karp style rules."""
        return {"R2": 2 * n, "R3": 2 * m}.get(self.rule)


@dataclass(frozen=True)
class SolverConfig:
    direction: DirectionRule = field(default_factory=DirectionRule)
    step: StepRule = field(default_factory=StepRule)
    max_stall: int = 100
    eps_grad: float = 1e-6
    eps_dir: float = 1e-6
    beta_floor: float = 1e-8
    max_iterations: int = 100_000
    upper_bound: float | None = None
    improvement_tol: float = IMPROVEMENT_TOL
    r1_reference: str = "previous"
    keep_vectors: bool = False

    def __post_init__(self):
        if self.max_stall < 1 or self.max_iterations < 1:
            raise ValueError("max_stall and max_iterations must be positive")
        if min(self.eps_grad, self.eps_dir, self.beta_floor) <= 0:
            raise ValueError("tolerances must be positive")
        if self.r1_reference not in ("previous", "best"):
            raise ValueError("r1_reference must be 'previous' or 'best'")

    @classmethod
    def of(cls, variant: str = "SG1", rule: str = "R1", alpha: float = 0.7, **kw) -> "SolverConfig":
        return cls(direction=DirectionRule(variant, alpha), step=StepRule(rule), **kw)


@dataclass
class IterationRecord:
    q: int
    theta: float
    best_theta: float
    beta: float
    lam: float
    grad_norm: float
    dir_norm: float
    subgradient: np.ndarray | None = None
    direction: np.ndarray | None = None


@dataclass
class SolverReport:
    best_theta: float
    upper_bound: float
    ub_feasible: bool
    iterations: int
    stop_reason: str
    trajectory: list[IterationRecord]
    wall_time: float
    all_y_exact: bool
    best_w: np.ndarray


# --------------------------------------------------------------------------
# building blocks


def initial_multipliers(m: int) -> np.ndarray:
    return np.zeros(m)


def deflection_sigma(rule: DirectionRule, g: np.ndarray, d_prev: np.ndarray) -> float:
    """Deflection coefficient for SG1-SG5."""
    v = rule.variant
    if v == "SG6":
        raise ValueError("SG6 combines subgradients and has no deflection coefficient")
    if v == "SG1":
        return 0.0
    if v == "SG4":
        return 0.8
    dn2 = float(np.dot(d_prev, d_prev))
    if dn2 == 0.0:
        raise ZeroDivisionError("previous direction is zero")
    if v == "SG5":
        return float(np.linalg.norm(g)) / math.sqrt(dn2)
    gd = float(np.dot(g, d_prev))
    if gd >= 0:
        return 0.0
    if v == "SG2":
        return -1.5 * gd / dn2
    return float(np.linalg.norm(g)) / math.sqrt(dn2)  # SG3


def direction(
    rule: DirectionRule,
    q: int,
    g: np.ndarray,
    g_prev: np.ndarray | None = None,
    d_prev: np.ndarray | None = None,
    eps_dir: float = 1e-6,
) -> np.ndarray:
    if q == 0:
        d = g.copy()
    elif rule.variant == "SG6":
        d = rule.alpha * g + (1 - rule.alpha) * g_prev
    elif rule.variant == "SG1":
        d = g.copy()
    else:
        d = g + deflection_sigma(rule, g, d_prev) * d_prev
    if np.linalg.norm(d) < eps_dir:
        return g.copy()
    return d


def step_length(beta: float, upper_bound: float, theta: float, d: np.ndarray) -> float:
    dn2 = float(np.dot(d, d))
    if dn2 == 0.0:
        raise ZeroDivisionError("zero search direction")
    return beta * (upper_bound - theta) / dn2


def beta_update(
    rule: StepRule,
    beta: float,
    improved: bool,
    q: int,
    n: int,
    m: int,
    beta_floor: float = 1e-8,
) -> float:
    """Step-length parameter to use at iteration ``q``."""
    if rule.rule in CONSTANT_BETA:
        return CONSTANT_BETA[rule.rule]
    if rule.rule == "R1":
        new = beta if improved else beta / 2
    else:
        p = rule.period(n, m)
        new = beta / 2 if q > 0 and p and q % p == 0 else beta
    return max(new, beta_floor)


def update_multipliers(w: np.ndarray, lam: float, d: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, w + lam * d)


# --------------------------------------------------------------------------
# upper bound


def _design_cost(inst: Instance, load: np.ndarray) -> float | None:
    """Cost of the cheapest facilities carrying ``load``; None if some edge overflows."""
    total = 0.0
    for e, flow in zip(inst.edges, load):
        if flow <= 0:
            continue
        for f in e.facilities:
            if f.capacity >= flow:
                total += f.cost
                break
        else:
            return None
    return total


def _greedy_capacity_routing(inst: Instance) -> np.ndarray | None:
    """Route commodities one by one (largest first) on paths weighted by
    inverse residual top capacity, using only edges that still fit."""
    residual = inst.capacity_matrix.max(axis=1).astype(float)
    load = np.zeros(inst.m)
    graph = nx.Graph()
    graph.add_nodes_from(range(inst.node_count))
    for e in inst.edges:
        graph.add_edge(e.u, e.v, id=e.id)
    order = sorted(inst.commodities, key=lambda c: (-c.demand, c.id))
    for com in order:
        def weight(a, b, data, demand=com.demand):
            r = residual[data["id"]]
            return None if r < demand else 1.0 / r
        try:
            nodes = nx.dijkstra_path(graph, com.source, com.sink, weight=weight)
        except nx.NetworkXNoPath:
            return None
        for a, b in zip(nodes, nodes[1:]):
            eid = graph[a][b]["id"]
            residual[eid] -= com.demand
            load[eid] += com.demand
    return load


def _cut_infeasible(inst: Instance) -> bool:
    """True if some commodity alone exceeds a cut of the all-largest network."""
    graph = nx.DiGraph()
    for e in inst.edges:
        cap = max(f.capacity for f in e.facilities)
        graph.add_edge(e.u, e.v, capacity=cap)
        graph.add_edge(e.v, e.u, capacity=cap)
    for com in inst.commodities:
        value = nx.maximum_flow_value(graph, com.source, com.sink)
        if value < com.demand:
            return True
    return False


def compute_upper_bound(inst: Instance) -> tuple[float, bool]:
    """Cost of a heuristic design and whether that design is feasible.

    Fewest-hop routing is tried first, then a capacity-aware greedy
    rerouting. If both overflow, the all-largest-facility cost is returned
    with ``feasible=False``, unless a single-commodity cut already proves
    the instance infeasible.
    """
    if not inst.k:
        return 0.0, True
    load = edge_flows(inst, all_pairs_shortest_paths(inst, np.zeros(inst.m)))
    cost = _design_cost(inst, load)
    if cost is not None:
        return cost, True
    load = _greedy_capacity_routing(inst)
    if load is not None:
        cost = _design_cost(inst, load)
        if cost is not None:
            return cost, True
    if _cut_infeasible(inst):
        raise InfeasibleInstanceError("a commodity demand exceeds a cut capacity")
    return float(sum(max(f.cost for f in e.facilities) for e in inst.edges)), False


# --------------------------------------------------------------------------
# main loop


def _improves(theta: float, ref: float, tol: float) -> bool:
    if ref == -math.inf:
        return True
    return theta > ref + tol * (1 + abs(ref))


def run(inst: Instance, config: SolverConfig = SolverConfig(), on_iteration=None) -> SolverReport:
    """Maximize the Lagrangian dual by deflected subgradient ascent.

    ``on_iteration`` is called with each IterationRecord as it is produced.
    """
    start = time.perf_counter()
    if config.upper_bound is None:
        ub, ub_feasible = compute_upper_bound(inst)
    else:
        ub, ub_feasible = float(config.upper_bound), True
    n, m = inst.node_count, inst.m
    dir_rule, step_rule = config.direction, config.step

    w = initial_multipliers(m)
    best, best_w = -math.inf, w.copy()
    beta = step_rule.initial_beta
    stall = 0
    all_exact = True
    g_prev = d_prev = None
    prev_theta = -math.inf
    trajectory: list[IterationRecord] = []
    q = 0
    while True:
        ev = evaluate_dual(inst, w)
        theta, g = ev.theta, ev.subgradient
        all_exact = all_exact and ev.exact_y
        improved = _improves(theta, best, config.improvement_tol)
        if config.r1_reference == "previous":
            increased = _improves(theta, prev_theta, config.improvement_tol)
        else:
            increased = improved
        prev_theta = theta
        # the best value always tracks the maximum; the tolerance only governs stalling
        stall = 0 if improved else stall + 1
        if theta > best:
            best, best_w = theta, w.copy()
        g_norm = float(np.linalg.norm(g))

        reason = None
        if g_norm < config.eps_grad:
            reason = "zero_gradient"
        elif ub - best < GAP_TOL * (1 + abs(ub)):
            reason = "gap_closed"
        elif stall >= config.max_stall:
            reason = "stall"
        elif q + 1 >= config.max_iterations:
            reason = "iteration_cap"
        if reason is not None:
            trajectory.append(IterationRecord(
                q, theta, best, beta, 0.0, g_norm, 0.0,
                g.copy() if config.keep_vectors else None, None,
            ))
            if on_iteration is not None:
                on_iteration(trajectory[-1])
            break

        d = direction(dir_rule, q, g, g_prev, d_prev, config.eps_dir)
        beta = beta_update(step_rule, beta, increased, q, n, m, config.beta_floor)
        lam = step_length(beta, ub, theta, d)
        trajectory.append(IterationRecord(
            q, theta, best, beta, lam, g_norm, float(np.linalg.norm(d)),
            g.copy() if config.keep_vectors else None,
            d.copy() if config.keep_vectors else None,
        ))
        if on_iteration is not None:
            on_iteration(trajectory[-1])
        w = update_multipliers(w, lam, d)
        g_prev, d_prev = g, d
        q += 1

    return SolverReport(
        best_theta=best,
        upper_bound=ub,
        ub_feasible=ub_feasible,
        iterations=len(trajectory),
        stop_reason=reason,
        trajectory=trajectory,
        wall_time=time.perf_counter() - start,
        all_y_exact=all_exact,
        best_w=best_w,
    )
