"""Brute-force oracles and property checks for small instances.

Nothing here reuses the solver internals in ``lagrangian``: distances come
from simple-path enumeration, facility selection from exhaustive
enumeration, and the full design problem from design enumeration plus a
discretized path-flow search. The property checks (supergradient, weak
duality) do call ``evaluate_dual``, since that is what they certify.
"""

from __future__ import annotations

import itertools
import math
from functools import reduce

import numpy as np

from .instance import Instance
from .lagrangian import evaluate_dual

MAX_SP_NODES = 10
MAX_AP_Y_CHOICES = 10**7
MAX_OPT_EDGES = 8
MAX_OPT_COMMODITIES = 3
_CHUNK = 1 << 20


class OracleSizeError(ValueError):
    """The instance is too large for exhaustive enumeration."""


def _adjacency(inst: Instance) -> list[list[tuple[int, int]]]:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(inst.node_count)]
    for e in inst.edges:
        adj[e.u].append((e.v, e.id))
        adj[e.v].append((e.u, e.id))
    return adj


def simple_paths(inst: Instance, source: int, sink: int, usable=None) -> list[list[int]]:
    """All simple source-sink paths as edge-id lists, optionally over ``usable`` edges only."""
    adj = _adjacency(inst)
    out: list[list[int]] = []
    visited = [False] * inst.node_count

    def dfs(x: int, path: list[int]):
        if x == sink:
            out.append(list(path))
            return
        visited[x] = True
        for y, e in adj[x]:
            if not visited[y] and (usable is None or usable[e]):
                path.append(e)
                dfs(y, path)
                path.pop()
        visited[x] = False

    dfs(source, [])
    return out


def brute_force_shortest_paths(inst: Instance, w) -> np.ndarray:
    """Distance matrix by enumerating every simple path (n <= 10)."""
    n = inst.node_count
    if n > MAX_SP_NODES:
        raise OracleSizeError(f"{n} nodes exceeds the simple-path oracle limit of {MAX_SP_NODES}")
    w = [float(x) for x in w]
    adj = _adjacency(inst)
    dist = np.full((n, n), math.inf)
    for s in range(n):
        visited = [False] * n

        def dfs(x: int, length: float):
            if length < dist[s, x]:
                dist[s, x] = length
            visited[x] = True
            for y, e in adj[x]:
                if not visited[y]:
                    dfs(y, length + w[e])
            visited[x] = False

        dfs(s, 0.0)
    return dist


def brute_force_ap_y(inst: Instance, c, terminals) -> float:
    """Exact facility-selection optimum over all per-edge choices.

    Every combination of {none, facility 1..L_e} per edge is scored; those
    leaving a terminal without an installed incident edge are discarded.
    """
    m = inst.m
    counts = [len(e.facilities) + 1 for e in inst.edges]
    total = reduce(lambda a, b: a * b, counts, 1)
    if total > MAX_AP_Y_CHOICES:
        raise OracleSizeError(f"{total} choice vectors exceeds {MAX_AP_Y_CHOICES}")
    c = np.asarray(c, dtype=float)
    # table[e, 0] = 0 (nothing installed), table[e, l+1] = c[e, l]
    table = np.zeros((m, max(counts, default=1)))
    for e in range(m):
        table[e, 1:counts[e]] = c[e, :counts[e] - 1]
    terms = sorted(terminals)
    incidence = np.zeros((m, len(terms)), dtype=np.int64)
    for j, v in enumerate(terms):
        for e in inst.edges:
            if v in (e.u, e.v):
                incidence[e.id, j] = 1
    if m == 0:
        return 0.0 if not terms else math.inf

    best = math.inf
    radix = np.array(counts, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        choice = np.empty((codes.size, m), dtype=np.int64)
        rest = codes
        for e in range(m):
            choice[:, e] = rest % radix[e]
            rest = rest // radix[e]
        value = table[np.arange(m)[None, :], choice].sum(axis=1)
        if terms:
            covered = ((choice > 0).astype(np.int64) @ incidence) > 0
            value = np.where(covered.all(axis=1), value, math.inf)
        best = min(best, float(value.min()))
    return best


def brute_force_theta(inst: Instance, w, terminals) -> float:
    """Dual value from the two enumeration oracles."""
    w = np.asarray(w, dtype=float)
    c = np.array([[f.cost - w[e.id] * f.capacity for f in e.facilities]
                  + [math.inf] * (inst.cost_matrix.shape[1] - len(e.facilities))
                  for e in inst.edges]).reshape(inst.m, -1)
    dist = brute_force_shortest_paths(inst, w)
    routing = sum(com.demand * dist[com.source, com.sink] for com in inst.commodities)
    return brute_force_ap_y(inst, c, terminals) + routing


# --------------------------------------------------------------------------
# full problem


def _flow_grid_step(inst: Instance) -> float:
    """Half of the gcd of all demands and capacities.

    Exact for a single commodity (integral max-flow); for several
    commodities designs that only admit finer splits are reported
    infeasible, so the returned optimum can only be too high.
    """
    values = [c.demand for c in inst.commodities]
    values += [f.capacity for e in inst.edges for f in e.facilities]
    return reduce(math.gcd, values) / 2


def _routable(inst: Instance, capacity: np.ndarray, step: float) -> bool:
    usable = capacity > 0
    residual = np.round(capacity / step).astype(np.int64)
    plans = []
    for com in inst.commodities:
        paths = simple_paths(inst, com.source, com.sink, usable)
        if not paths:
            return False
        plans.append((int(round(com.demand / step)), paths))
    plans.sort(key=lambda p: len(p[1]))

    def place(k: int, i: int, left: int) -> bool:
        if left == 0:
            return k + 1 == len(plans) or place(k + 1, 0, plans[k + 1][0])
        paths = plans[k][1]
        if i == len(paths):
            return False
        path = paths[i]
        room = min(int(residual[e]) for e in path)
        for amount in range(min(room, left), -1, -1):
            for e in path:
                residual[e] -= amount
            ok = place(k, i + 1, left - amount)
            for e in path:
                residual[e] += amount
            if ok:
                return True
        return False

    return not plans or place(0, 0, plans[0][0])


def brute_force_opt(inst: Instance) -> float:
    """Exact optimum of the full design problem (m <= 8, K <= 3), +inf if infeasible.

    Designs are scanned in increasing cost; the first one that can route
    every commodity on a discretized split over simple paths is optimal.
    """
    if inst.m > MAX_OPT_EDGES or inst.k > MAX_OPT_COMMODITIES:
        raise OracleSizeError(f"opt oracle limited to m <= {MAX_OPT_EDGES}, K <= {MAX_OPT_COMMODITIES}")
    if not inst.k:
        return 0.0
    step = _flow_grid_step(inst)
    menus = [[(0, 0)] + [(f.capacity, f.cost) for f in e.facilities] for e in inst.edges]
    designs = []
    for combo in itertools.product(*menus):
        designs.append((sum(cost for _, cost in combo), [cap for cap, _ in combo]))
    designs.sort(key=lambda d: d[0])
    for cost, caps in designs:
        if _routable(inst, np.array(caps, dtype=float), step):
            return float(cost)
    return math.inf


# --------------------------------------------------------------------------
# property checks


def check_supergradient(inst: Instance, w, w_prime, tol: float = 1e-6) -> bool:
    """``theta(w') <= theta(w) + g(w).(w' - w)`` up to a relative tolerance."""
    w = np.asarray(w, dtype=float)
    w_prime = np.asarray(w_prime, dtype=float)
    at_w = evaluate_dual(inst, w)
    at_wp = evaluate_dual(inst, w_prime)
    if not (at_w.exact_y and at_wp.exact_y):
        raise ValueError("supergradient check needs exact subproblem solutions")
    rhs = at_w.theta + float(np.dot(at_w.subgradient, w_prime - w))
    return at_wp.theta <= rhs + tol * (1 + abs(at_w.theta))


def check_concavity(inst: Instance, w1, w2, lam: float, tol: float = 1e-6) -> bool:
    """``theta`` at a convex combination is at least the combination of values."""
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    mid = evaluate_dual(inst, lam * w1 + (1 - lam) * w2).theta
    chord = lam * evaluate_dual(inst, w1).theta + (1 - lam) * evaluate_dual(inst, w2).theta
    return mid >= chord - tol * (1 + abs(mid))


def check_weak_duality(report, opt_or_ub: float, tol: float = 1e-6) -> bool:
    return report.best_theta <= opt_or_ub + tol
