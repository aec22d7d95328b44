"""Lagrangian dual of the arc-path model with dualized capacity constraints.

For multipliers ``w >= 0`` (one per edge) the relaxed problem separates into

* facility selection: pick at most one facility per edge at reduced cost
  ``f - w * u``, with every commodity endpoint covered by some installed
  edge (terminal-cover cuts);
* routing: send each commodity's demand along one shortest path under edge
  weights ``w``.

``evaluate_dual`` returns the dual value, both subproblem solutions and the
subgradient ``flow - installed capacity``.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .instance import Instance, terminal_set

NO_FACILITY = -1
DEFAULT_EXPANSION_BUDGET = 1_000_000


def _as_multipliers(inst: Instance, w) -> np.ndarray:
    arr = np.asarray(w, dtype=float).reshape(-1)
    if arr.shape[0] != inst.m:
        raise ValueError(f"multiplier vector has length {arr.shape[0]}, expected {inst.m}")
    if np.any(arr < 0):
        raise ValueError("multipliers must be nonnegative")
    return arr


def reduced_facility_costs(inst: Instance, w) -> np.ndarray:
    """Reduced facility costs ``c[e, l] = f[e, l] - w[e] * u[e, l]``.

    Returned as an (m, Lmax) array; slots beyond an edge's menu are +inf.
    """
    w = _as_multipliers(inst, w)
    c = inst.cost_matrix - w[:, None] * inst.capacity_matrix
    c[~np.isfinite(inst.cost_matrix)] = np.inf
    return c


# --------------------------------------------------------------------------
# all-pairs shortest paths


@dataclass(frozen=True)
class ShortestPathTable:
    """All-pairs distances with next-hop matrix for path reconstruction.

    ``hops[a, b]`` is the edge count of the stored path and ``next_node[a, b]``
    the node following ``a`` on it.
    """

    dist: np.ndarray
    hops: np.ndarray
    next_node: np.ndarray
    edge_index: np.ndarray

    def node_path(self, a: int, b: int) -> list[int]:
        nodes = [a]
        while a != b:
            a = int(self.next_node[a, b])
            nodes.append(a)
        return nodes

    def path(self, a: int, b: int) -> list[int]:
        """Edge ids of the stored shortest path from ``a`` to ``b``."""
        nodes = self.node_path(a, b)
        return [int(self.edge_index[x, y]) for x, y in zip(nodes, nodes[1:])]


def all_pairs_shortest_paths(inst: Instance, w) -> ShortestPathTable:
    """Floyd-Warshall under edge weights ``w`` with deterministic ties.

    Labels are compared lexicographically as (cost, hop count); on a full
    tie the path found through the smallest intermediate node is kept.
    """
    w = _as_multipliers(inst, w)
    n = inst.node_count
    dist = np.full((n, n), np.inf)
    hops = np.full((n, n), np.iinfo(np.int64).max // 4, dtype=np.int64)
    nxt = np.tile(np.arange(n, dtype=np.int64), (n, 1))
    np.fill_diagonal(dist, 0.0)
    np.fill_diagonal(hops, 0)
    if inst.m:
        u, v = inst.endpoints_array[:, 0], inst.endpoints_array[:, 1]
        dist[u, v] = w
        dist[v, u] = w
        hops[u, v] = 1
        hops[v, u] = 1

    for k in range(n):
        cand = dist[:, k, None] + dist[None, k, :]
        cand_h = hops[:, k, None] + hops[None, k, :]
        better = (cand < dist) | ((cand == dist) & (cand_h < hops))
        if better.any():
            dist = np.where(better, cand, dist)
            hops = np.where(better, cand_h, hops)
            nxt = np.where(better, nxt[:, k, None], nxt)
    return ShortestPathTable(dist, hops, nxt, inst.edge_index)


def edge_flows(inst: Instance, sp: ShortestPathTable) -> np.ndarray:
    """Per-edge load when every commodity follows its stored shortest path."""
    flow = np.zeros(inst.m)
    if not inst.k:
        return flow
    src, dst, dem = inst.commodity_arrays
    cur = src.copy()
    active = cur != dst
    while active.any():
        a, d = cur[active], dst[active]
        step = sp.next_node[a, d]
        np.add.at(flow, sp.edge_index[a, step], dem[active])
        cur[active] = step
        active = cur != dst
    return flow


def solve_ap_z(inst: Instance, sp: ShortestPathTable) -> tuple[float, list[list[int]]]:
    """Route all demand of each commodity on its shortest path."""
    if not inst.k:
        return 0.0, []
    src, dst, dem = inst.commodity_arrays
    theta_z = float(np.dot(dem, sp.dist[src, dst]))
    routing = [sp.path(c.source, c.sink) for c in inst.commodities]
    return theta_z, routing


# --------------------------------------------------------------------------
# facility selection with terminal cover


@dataclass
class _CoverResult:
    cost: float
    edges: list[int]
    exact: bool


def _cover_component(
    terminals: list[int],
    options: dict[int, list[tuple[float, int, int]]],
    bit: dict[int, int],
    budget: int,
) -> tuple[_CoverResult, int]:
    """Best-first search over subsets of still-uncovered terminals.

    The bound charges each uncovered terminal its cheapest incident edge,
    halved when the edge's other end is also uncovered. Splitting every
    edge of a cover evenly among the uncovered terminals it touches shows
    the bound is admissible; it is also consistent, so the first goal
    popped is optimal. Returns the result and the expansions spent.
    """
    def bound(mask: int) -> float:
        total = 0.0
        for v in terminals:
            b = bit[v]
            if not mask & b:
                continue
            best = np.inf
            for c, _, emask in options[v]:
                if c >= 2 * best:
                    break
                share = c / 2 if (emask & mask) != b else c
                if share < best:
                    best = share
            total += best
        return total

    # branch on terminals with few options first
    branch_order = sorted(terminals, key=lambda v: (len(options[v]), v))
    full = 0
    for v in terminals:
        full |= bit[v]
    root_bound = bound(full)
    counter = itertools.count()
    heap: list = [(root_bound, next(counter), 0.0, full, ())]
    best_g = {full: 0.0}
    expansions = 0
    while heap:
        _, _, g, mask, chosen = heapq.heappop(heap)
        if g > best_g.get(mask, np.inf):
            continue
        if mask == 0:
            return _CoverResult(g, list(chosen), True), expansions
        expansions += 1
        if expansions > budget:
            break
        v = next(x for x in branch_order if mask & bit[x])
        seen_single = False
        for c, e, emask in options[v]:
            hit = emask & mask
            if hit == bit[v]:
                # covers only v: the cheapest such edge dominates the rest
                if seen_single:
                    continue
                seen_single = True
            new_mask = mask & ~hit
            new_g = g + c
            if new_g >= best_g.get(new_mask, np.inf):
                continue
            best_g[new_mask] = new_g
            heapq.heappush(heap, (new_g + bound(new_mask), next(counter), new_g, new_mask, chosen + (e,)))

    # budget exhausted: report the root bound, keep a feasible greedy cover
    edges = sorted({options[v][0][1] for v in terminals})
    return _CoverResult(root_bound, edges, False), expansions


def _min_cost_terminal_cover(
    inst: Instance,
    costs: np.ndarray,
    uncovered: Sequence[int],
    budget: int,
) -> _CoverResult:
    """Cheapest edge set touching every node of ``uncovered`` (costs >= 0).

    Terminals joined by useful edges between two uncovered terminals form
    independent components, each solved by its own search.
    """
    terminals = list(uncovered)
    if not terminals:
        return _CoverResult(0.0, [], True)
    bit = {v: 1 << i for i, v in enumerate(terminals)}
    ends = inst.endpoints_array

    parent = {v: v for v in terminals}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    cheapest = {}
    for v in terminals:
        inc = inst.incident_edges[v]
        if not inc:
            raise ValueError(f"terminal node {v} has no incident edge")
        cheapest[v] = min(float(costs[e]) for e in inc)

    options: dict[int, list[tuple[float, int, int]]] = {}
    for v in terminals:
        opts = []
        for e in inst.incident_edges[v]:
            a, b = int(ends[e, 0]), int(ends[e, 1])
            other = b if a == v else a
            c = float(costs[e])
            if other in bit:
                # two separate cheapest edges would do strictly better
                if c > cheapest[v] + cheapest[other]:
                    continue
                parent[find(other)] = find(v)
            opts.append((c, e, bit.get(a, 0) | bit.get(b, 0)))
        opts.sort()
        options[v] = opts

    groups: dict[int, list[int]] = {}
    for v in terminals:
        groups.setdefault(find(v), []).append(v)

    total, edges, exact = 0.0, [], True
    for root in sorted(groups):
        res, spent = _cover_component(groups[root], options, bit, budget)
        budget = max(budget - spent, 0)
        total += res.cost
        edges.extend(res.edges)
        exact = exact and res.exact
    return _CoverResult(total, sorted(set(edges)), exact)


@dataclass(frozen=True)
class APYSolution:
    theta_y: float
    selection: np.ndarray  # facility index per edge, NO_FACILITY if none
    exact: bool


def solve_ap_y(
    inst: Instance,
    c: np.ndarray,
    terminals=None,
    *,
    budget: int = DEFAULT_EXPANSION_BUDGET,
) -> APYSolution:
    """Facility selection at reduced costs ``c`` with terminal-cover cuts.

    Every edge whose best reduced cost is negative is installed at its
    argmin. Terminals still uncovered are then covered by a cheapest set of
    additional edges. ``terminals=None`` uses the instance's commodity
    endpoints; pass an empty set to drop the cuts.
    """
    if terminals is None:
        terminals = terminal_set(inst)
    m = inst.m
    selection = np.full(m, NO_FACILITY, dtype=np.int64)
    if m == 0:
        if terminals:
            raise ValueError("terminal node has no incident edge")
        return APYSolution(0.0, selection, True)

    best = c.min(axis=1)
    arg = c.argmin(axis=1)
    negative = best < 0
    selection[negative] = arg[negative]
    theta = float(best[negative].sum())

    covered = set(inst.endpoints_array[negative].ravel().tolist())
    uncovered = sorted(v for v in terminals if v not in covered)
    if uncovered:
        cover = _min_cost_terminal_cover(inst, best, uncovered, budget)
        for e in cover.edges:
            if selection[e] == NO_FACILITY:
                selection[e] = arg[e]
        return APYSolution(theta + cover.cost, selection, cover.exact)
    return APYSolution(theta, selection, True)


# --------------------------------------------------------------------------
# dual function


def installed_capacity(inst: Instance, selection: np.ndarray) -> np.ndarray:
    cap = np.zeros(inst.m)
    on = selection != NO_FACILITY
    cap[on] = inst.capacity_matrix[np.nonzero(on)[0], selection[on]]
    return cap


def compute_subgradient(inst: Instance, routing: Sequence[Sequence[int]], selection) -> np.ndarray:
    """``g[e]`` = demand routed through ``e`` minus the capacity installed on it."""
    flow = np.zeros(inst.m)
    for com, path in zip(inst.commodities, routing):
        for e in path:
            flow[e] += com.demand
    return flow - installed_capacity(inst, np.asarray(selection))


@dataclass
class DualEvaluation:
    theta: float
    theta_y: float
    theta_z: float
    selection: np.ndarray
    subgradient: np.ndarray
    exact_y: bool
    shortest_paths: ShortestPathTable = field(repr=False)
    commodity_pairs: tuple = field(repr=False, default=())

    @property
    def routing(self) -> list[list[int]]:
        """Per-commodity edge path (built on demand)."""
        return [self.shortest_paths.path(s, t) for s, t in self.commodity_pairs]


def evaluate_dual(
    inst: Instance,
    w,
    *,
    terminals=None,
    budget: int = DEFAULT_EXPANSION_BUDGET,
) -> DualEvaluation:
    """Dual value, subproblem solutions and subgradient at multipliers ``w``."""
    w = _as_multipliers(inst, w)
    ap_y = solve_ap_y(inst, reduced_facility_costs(inst, w), terminals, budget=budget)
    sp = all_pairs_shortest_paths(inst, w)
    if inst.k:
        src, dst, dem = inst.commodity_arrays
        theta_z = float(np.dot(dem, sp.dist[src, dst]))
    else:
        theta_z = 0.0
    g = edge_flows(inst, sp) - installed_capacity(inst, ap_y.selection)
    return DualEvaluation(
        theta=ap_y.theta_y + theta_z,
        theta_y=ap_y.theta_y,
        theta_z=theta_z,
        selection=ap_y.selection,
        subgradient=g,
        exact_y=ap_y.exact,
        shortest_paths=sp,
        commodity_pairs=tuple((c.source, c.sink) for c in inst.commodities),
    )
