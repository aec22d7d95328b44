"""DCMNDP instances: data model, text format, validation and random generation.

An instance is an undirected graph whose edges each carry a menu of
discrete facilities (capacity, cost), plus point-to-point commodities.
Instances are immutable; numeric views used by the solvers are cached
numpy arrays built on first access.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

FORMAT_HEADER = "dcmndp 1"


class InstanceFormatError(ValueError):
    """Raised when a DCMNDP-v1 text cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InstanceValidationError(ValueError):
    """Raised when a parsed instance breaks one or more invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class FacilityOption:
    capacity: int
    cost: int


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int
    facilities: tuple[FacilityOption, ...]

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.u, self.v)


@dataclass(frozen=True)
class Commodity:
    id: int
    source: int
    sink: int
    demand: int


@dataclass(frozen=True, eq=True)
class Instance:
    node_count: int
    edges: tuple[Edge, ...]
    commodities: tuple[Commodity, ...]
    name: str = ""
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.node_count

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def k(self) -> int:
        return len(self.commodities)

    # Cached numeric views. cached_property writes straight into __dict__,
    # which is compatible with frozen dataclasses and ignored by __eq__.

    @cached_property
    def endpoints_array(self) -> np.ndarray:
        """(m, 2) int array of edge endpoints."""
        arr = np.array([(e.u, e.v) for e in self.edges], dtype=np.int64)
        return arr.reshape(len(self.edges), 2)

    @cached_property
    def facility_counts(self) -> np.ndarray:
        return np.array([len(e.facilities) for e in self.edges], dtype=np.int64)

    @cached_property
    def capacity_matrix(self) -> np.ndarray:
        """(m, Lmax) capacities, zero-padded."""
        return self._padded("capacity", 0.0)

    @cached_property
    def cost_matrix(self) -> np.ndarray:
        """(m, Lmax) costs, +inf-padded so padded slots never win a min."""
        return self._padded("cost", np.inf)

    @cached_property
    def edge_index(self) -> np.ndarray:
        """(n, n) matrix mapping a node pair to its edge id, -1 if absent."""
        idx = np.full((self.node_count, self.node_count), -1, dtype=np.int64)
        for e in self.edges:
            idx[e.u, e.v] = e.id
            idx[e.v, e.u] = e.id
        return idx

    @cached_property
    def incident_edges(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.node_count)]
        for e in self.edges:
            inc[e.u].append(e.id)
            inc[e.v].append(e.id)
        return tuple(tuple(x) for x in inc)

    @cached_property
    def commodity_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = np.array([c.source for c in self.commodities], dtype=np.int64)
        dst = np.array([c.sink for c in self.commodities], dtype=np.int64)
        dem = np.array([c.demand for c in self.commodities], dtype=float)
        return src, dst, dem

    def _padded(self, attr: str, fill: float) -> np.ndarray:
        width = max((len(e.facilities) for e in self.edges), default=1)
        out = np.full((len(self.edges), max(width, 1)), fill, dtype=float)
        for e in self.edges:
            for l, f in enumerate(e.facilities):
                out[e.id, l] = getattr(f, attr)
        return out


def make_instance(
    node_count: int,
    edges: Iterable[tuple[int, int, Sequence[tuple[int, int]]]],
    commodities: Iterable[tuple[int, int, int]],
    name: str = "",
    seed: int | None = None,
) -> Instance:
    """Build an Instance from plain tuples; ids follow iteration order.

    ``edges`` yields ``(u, v, [(capacity, cost), ...])`` and ``commodities``
    yields ``(source, sink, demand)``. No validation is performed.
    """
    edge_objs = tuple(
        Edge(i, u, v, tuple(FacilityOption(int(c), int(f)) for c, f in menu))
        for i, (u, v, menu) in enumerate(edges)
    )
    com_objs = tuple(
        Commodity(i, s, t, int(d)) for i, (s, t, d) in enumerate(commodities)
    )
    return Instance(node_count, edge_objs, com_objs, name=name, seed=seed)


def tri3() -> Instance:
    """The 3-node desk fixture: a triangle, two facilities per edge, one commodity 0->2."""
    menu = [(5, 10), (10, 18)]
    return make_instance(
        3,
        [(0, 1, menu), (1, 2, menu), (0, 2, menu)],
        [(0, 2, 7)],
        name="TRI3",
    )


# --------------------------------------------------------------------------
# validation


def _connected(node_count: int, edges: Sequence[Edge]) -> bool:
    if node_count <= 1:
        return True
    adj: list[list[int]] = [[] for _ in range(node_count)]
    for e in edges:
        if 0 <= e.u < node_count and 0 <= e.v < node_count:
            adj[e.u].append(e.v)
            adj[e.v].append(e.u)
    seen = {0}
    queue = deque([0])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return len(seen) == node_count


def validate(inst: Instance) -> list[str]:
    """Return every violated invariant as a message; an empty list means valid."""
    out: list[str] = []
    n = inst.node_count
    if n < 1:
        out.append("node count must be positive")
    pairs: set[tuple[int, int]] = set()
    for pos, e in enumerate(inst.edges):
        if e.id != pos:
            out.append(f"edge id {e.id} out of order (expected {pos})")
        if not (0 <= e.u < n and 0 <= e.v < n):
            out.append(f"edge {e.id} endpoint out of range")
        if e.u == e.v:
            out.append(f"edge {e.id} is a self-loop")
        key = (min(e.u, e.v), max(e.u, e.v))
        if key in pairs:
            out.append(f"duplicate edge between {key[0]} and {key[1]} at edge {e.id}")
        pairs.add(key)
        if not e.facilities:
            out.append(f"edge {e.id} has no facilities")
        for f in e.facilities:
            if f.capacity <= 0 or f.cost <= 0:
                out.append(f"non-positive facility capacity or cost at edge {e.id}")
                break
        for a, b in zip(e.facilities, e.facilities[1:]):
            if not (a.capacity < b.capacity and a.cost < b.cost):
                out.append(f"facilities not step-increasing at edge {e.id}")
                break
    for pos, c in enumerate(inst.commodities):
        if c.id != pos:
            out.append(f"commodity id {c.id} out of order (expected {pos})")
        if not (0 <= c.source < n and 0 <= c.sink < n):
            out.append(f"commodity {c.id} endpoint out of range")
        if c.source == c.sink:
            out.append(f"commodity {c.id} has source equal to sink")
        if c.demand <= 0:
            out.append(f"commodity {c.id} has non-positive demand")
    if n >= 1 and not _connected(n, inst.edges):
        out.append("graph disconnected")
    return out


def terminal_set(inst: Instance) -> frozenset[int]:
    """Nodes that are the source or sink of at least one commodity."""
    nodes: set[int] = set()
    for c in inst.commodities:
        nodes.add(c.source)
        nodes.add(c.sink)
    return frozenset(nodes)


# --------------------------------------------------------------------------
# DCMNDP-v1 text format


def _ints(tokens: Sequence[str], lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise InstanceFormatError(f"expected integers, got {' '.join(tokens)!r}", lineno) from None


def parse_instance(text: str, *, check: bool = True, name: str = "") -> Instance:
    """Parse DCMNDP-v1 text.

    With ``check`` (the default) the result is validated and an
    InstanceValidationError lists every broken invariant. ``name`` is used
    when the text carries no ``# name`` metadata comment.
    """
    meta_name, meta_seed = None, None
    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "name":
                meta_name = parts[1]
            elif len(parts) == 2 and parts[0] == "seed":
                meta_seed = _ints(parts[1:], lineno)[0]
            continue
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))

    if not rows or rows[0][1] != FORMAT_HEADER.split():
        raise InstanceFormatError(f"missing '{FORMAT_HEADER}' header", rows[0][0] if rows else 1)
    if len(rows) < 2:
        raise InstanceFormatError("missing size line", rows[0][0])
    lineno, tok = rows[1]
    if len(tok) != 6 or tok[0] != "n" or tok[2] != "m" or tok[4] != "k":
        raise InstanceFormatError("expected 'n <nodes> m <edges> k <commodities>'", lineno)
    n, m, k = _ints(tok[1::2], lineno)

    edges: list[Edge] = []
    commodities: list[Commodity] = []
    i = 2
    while i < len(rows):
        lineno, tok = rows[i]
        kind = tok[0]
        if kind == "e":
            if len(tok) != 5:
                raise InstanceFormatError("expected 'e <id> <u> <v> <L>'", lineno)
            eid, u, v, L = _ints(tok[1:], lineno)
            if L < 0:
                raise InstanceFormatError("negative facility count", lineno)
            menu = []
            for _ in range(L):
                i += 1
                if i >= len(rows):
                    raise InstanceFormatError(f"edge {eid}: missing facility lines", lineno)
                flineno, ftok = rows[i]
                if ftok[0] != "f" or len(ftok) != 3:
                    raise InstanceFormatError("expected 'f <capacity> <cost>'", flineno)
                cap, cost = _ints(ftok[1:], flineno)
                menu.append(FacilityOption(cap, cost))
            edges.append(Edge(eid, u, v, tuple(menu)))
        elif kind == "c":
            if len(tok) != 5:
                raise InstanceFormatError("expected 'c <id> <source> <sink> <demand>'", lineno)
            cid, s, t, d = _ints(tok[1:], lineno)
            commodities.append(Commodity(cid, s, t, d))
        elif kind == "f":
            raise InstanceFormatError("facility line outside an edge block", lineno)
        else:
            raise InstanceFormatError(f"unknown directive {kind!r}", lineno)
        i += 1

    if len(edges) != m:
        raise InstanceFormatError(f"declared {m} edges, found {len(edges)}")
    if len(commodities) != k:
        raise InstanceFormatError(f"declared {k} commodities, found {len(commodities)}")

    edges.sort(key=lambda e: e.id)
    commodities.sort(key=lambda c: c.id)
    inst = Instance(
        n, tuple(edges), tuple(commodities),
        name=meta_name if meta_name is not None else name,
        seed=meta_seed,
    )
    if check:
        problems = validate(inst)
        if problems:
            raise InstanceValidationError(problems)
    return inst


def serialize_instance(inst: Instance) -> str:
    """Canonical DCMNDP-v1 text: edges by id, facilities by capacity."""
    lines = [FORMAT_HEADER]
    if inst.name:
        lines.append(f"# name {inst.name}")
    if inst.seed is not None:
        lines.append(f"# seed {inst.seed}")
    lines.append(f"n {inst.node_count} m {inst.m} k {inst.k}")
    for e in sorted(inst.edges, key=lambda e: e.id):
        lines.append(f"e {e.id} {e.u} {e.v} {len(e.facilities)}")
        for f in sorted(e.facilities, key=lambda f: f.capacity):
            lines.append(f"f {f.capacity} {f.cost}")
    for c in sorted(inst.commodities, key=lambda c: c.id):
        lines.append(f"c {c.id} {c.source} {c.sink} {c.demand}")
    return "\n".join(lines) + "\n"


def read_instance(path, *, check: bool = True) -> Instance:
    from pathlib import Path

    p = Path(path)
    return parse_instance(p.read_text(), check=check, name=p.stem)


# --------------------------------------------------------------------------
# random generation


@dataclass(frozen=True)
class GeneratorParams:
    """Parameters of the random instance generator.

    Capacity of the first facility is drawn from ``first_capacity``; each
    further facility multiplies the previous capacity by a factor from
    ``capacity_growth`` (rounded up). Costs grow by the capacity increment
    times a factor from ``cost_per_unit`` (rounded up), so menus are
    strictly increasing in both fields.

    With ``ensure_feasible`` every edge whose largest facility cannot carry
    its load under fewest-hop routing gets its whole menu (capacities and
    costs) multiplied by ``ceil(load / largest capacity)``. Without it,
    sparse instances are frequently infeasible.
    """

    node_count: int
    edge_count: int
    facility_count: int = 3
    seed: int = 0
    demand: tuple[int, int] = (1, 20)
    first_capacity: tuple[int, int] = (10, 50)
    first_cost: tuple[int, int] = (10, 100)
    capacity_growth: tuple[float, float] = (1.5, 2.5)
    cost_per_unit: tuple[float, float] = (0.3, 0.9)
    ensure_feasible: bool = True
    name: str = field(default="")

    def problems(self) -> list[str]:
        n, m = self.node_count, self.edge_count
        out = []
        if n < 2:
            out.append("need at least 2 nodes")
        if m < n - 1:
            out.append(f"edge count {m} < n-1 = {n - 1}: graph cannot be connected")
        if m > n * (n - 1) // 2:
            out.append(f"edge count {m} > n(n-1)/2 = {n * (n - 1) // 2}")
        if self.facility_count < 1:
            out.append("facility count must be at least 1")
        for label, (lo, hi) in (("demand", self.demand), ("first_capacity", self.first_capacity),
                                ("first_cost", self.first_cost)):
            if not 0 < lo <= hi:
                out.append(f"{label} range must be positive and ordered")
        return out


def generate_random(params: GeneratorParams) -> Instance:
    """Random connected instance with one commodity per unordered node pair.

    A random spanning tree (each node attaches to an earlier one in a
    shuffled order) guarantees connectivity; the remaining edges are drawn
    uniformly from the unused pairs. Same params give the same instance.
    """
    problems = params.problems()
    if problems:
        raise ValueError("; ".join(problems))
    rng = random.Random(params.seed)
    n, m = params.node_count, params.edge_count

    order = list(range(n))
    rng.shuffle(order)
    pairs: list[tuple[int, int]] = []
    for i in range(1, n):
        a, b = order[i], order[rng.randrange(i)]
        pairs.append((min(a, b), max(a, b)))
    used = set(pairs)
    free = [(a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in used]
    pairs.extend(rng.sample(free, m - (n - 1)))
    pairs.sort()

    edges = []
    for u, v in pairs:
        cap = rng.randint(*params.first_capacity)
        cost = rng.randint(*params.first_cost)
        menu = [(cap, cost)]
        for _ in range(params.facility_count - 1):
            new_cap = math.ceil(cap * rng.uniform(*params.capacity_growth))
            cost = math.ceil(cost + (new_cap - cap) * rng.uniform(*params.cost_per_unit))
            cap = new_cap
            menu.append((cap, cost))
        edges.append((u, v, menu))

    commodities = [
        (s, t, rng.randint(*params.demand)) for s in range(n) for t in range(s + 1, n)
    ]
    name = params.name or f"rand-n{n}-m{m}-L{params.facility_count}-s{params.seed}"
    inst = make_instance(n, edges, commodities, name=name, seed=params.seed)
    if not params.ensure_feasible:
        return inst

    from .lagrangian import all_pairs_shortest_paths, edge_flows

    load = edge_flows(inst, all_pairs_shortest_paths(inst, np.zeros(m)))
    scaled = []
    for (u, v, menu), flow in zip(edges, load):
        factor = max(1, math.ceil(flow / menu[-1][0]))
        scaled.append((u, v, [(cap * factor, cost * factor) for cap, cost in menu]))
    return make_instance(n, scaled, commodities, name=name, seed=params.seed)
