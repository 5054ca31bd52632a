"""Knowledge connectivity graphs and the connectivity predicates built on them.

A knowledge graph has an edge ``i -> j`` exactly when ``j`` is in the
participant-detector output of ``i``.  Everything here is a pure function of
its arguments; vertex ids are small non-negative integers and every ordering
that leaks into a result is ascending by id.
"""

from __future__ import annotations

import itertools
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .errors import FaultAssignmentError, GenerationError, GraphError, SamePairError

ProcessId = int


class KnowledgeGraph:
    """Directed graph over process ids; ``pd(i)`` is the out-neighbourhood of ``i``."""

    __slots__ = ("_pd", "_vertices")

    def __init__(
        self,
        pd: Mapping[ProcessId, Iterable[ProcessId]],
        vertices: Iterable[ProcessId] | None = None,
    ):
        adj = {int(i): frozenset(int(j) for j in js) for i, js in pd.items()}
        verts = set(adj) if vertices is None else {int(v) for v in vertices}
        for i, js in adj.items():
            if i not in verts:
                raise GraphError(f"edge source {i} is not a vertex")
            if i in js:
                raise GraphError(f"self-loop on {i}")
            missing = js - verts
            if missing:
                raise GraphError(f"edges {i}->{sorted(missing)} leave the vertex set")
        for v in verts:
            if v < 0:
                raise GraphError(f"negative process id {v}")
            adj.setdefault(v, frozenset())
        self._pd = adj
        self._vertices = frozenset(verts)

    @classmethod
    def from_edges(
        cls, edges: Iterable[tuple[ProcessId, ProcessId]], vertices: Iterable[ProcessId] = ()
    ) -> KnowledgeGraph:
        pd: dict[int, set[int]] = {int(v): set() for v in vertices}
        for i, j in edges:
            pd.setdefault(i, set()).add(j)
            pd.setdefault(j, set())
        return cls(pd)

    @property
    def vertices(self) -> frozenset[ProcessId]:
        return self._vertices

    @property
    def edges(self) -> frozenset[tuple[ProcessId, ProcessId]]:
        return frozenset((i, j) for i, js in self._pd.items() for j in js)

    def pd(self, i: ProcessId) -> frozenset[ProcessId]:
        return self._pd[i]

    def sorted_vertices(self) -> list[ProcessId]:
        return sorted(self._vertices)

    def predecessors(self, j: ProcessId) -> frozenset[ProcessId]:
        return frozenset(i for i, js in self._pd.items() if j in js)

    def as_dict(self) -> dict[ProcessId, list[ProcessId]]:
        return {i: sorted(self._pd[i]) for i in self.sorted_vertices()}

    def without(self, removed: Iterable[ProcessId]) -> KnowledgeGraph:
        """Drop ``removed`` and every incident edge."""
        gone = set(removed)
        return KnowledgeGraph(
            {i: js - gone for i, js in self._pd.items() if i not in gone}
        )

    def induced(self, keep: Iterable[ProcessId]) -> KnowledgeGraph:
        return self.without(self._vertices - set(keep))

    def reachable_from(self, i: ProcessId) -> frozenset[ProcessId]:
        seen = {i}
        todo = [i]
        while todo:
            for w in self._pd[todo.pop()]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return frozenset(seen)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self._pd == other._pd

    def __hash__(self) -> int:
        return hash(frozenset(self._pd.items()))

    def __len__(self) -> int:
        return len(self._vertices)

    def __repr__(self) -> str:
        return f"KnowledgeGraph({self.as_dict()})"


@dataclass(frozen=True)
class FaultAssignment:
    """Static Byzantine adversary: at most ``f`` faults, the concrete set ``faulty``."""

    f: int
    faulty: frozenset[ProcessId] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "faulty", frozenset(self.faulty))
        if self.f < 0:
            raise FaultAssignmentError(f"f must be non-negative, got {self.f}")
        if len(self.faulty) > self.f:
            raise FaultAssignmentError(
                f"|F| = {len(self.faulty)} exceeds f = {self.f}"
            )

    def correct(self, g: KnowledgeGraph | Iterable[ProcessId]) -> frozenset[ProcessId]:
        verts = g.vertices if isinstance(g, KnowledgeGraph) else frozenset(g)
        return verts - self.faulty

    def check_against(self, g: KnowledgeGraph) -> None:
        stray = self.faulty - g.vertices
        if stray:
            raise FaultAssignmentError(f"faulty ids {sorted(stray)} are not vertices")


# -- strongly connected components -------------------------------------------


@dataclass(frozen=True)
class Condensation:
    components: tuple[frozenset[ProcessId], ...]
    component_of: Mapping[ProcessId, int]
    # component index -> indices of successor components
    dag: Mapping[int, frozenset[int]]

    def sinks(self) -> list[frozenset[ProcessId]]:
        out = [self.components[c] for c, succ in self.dag.items() if not succ]
        return sorted(out, key=min)


def strongly_connected_components(g: KnowledgeGraph) -> Condensation:
    """Iterative Tarjan, vertices visited in ascending order.

    Components are numbered by ascending smallest member so the result does
    not depend on traversal details.
    """
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    found: list[frozenset[int]] = []
    counter = itertools.count()

    for root in g.sorted_vertices():
        if root in index:
            continue
        work = [(root, iter(sorted(g.pd(root))))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            v, children = work[-1]
            advanced = False
            for w in children:
                if w not in index:
                    index[w] = low[w] = next(counter)
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(g.pd(w)))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                found.append(frozenset(comp))

    components = tuple(sorted(found, key=min))
    component_of = {v: c for c, comp in enumerate(components) for v in comp}
    dag: dict[int, set[int]] = {c: set() for c in range(len(components))}
    for i, j in g.edges:
        ci, cj = component_of[i], component_of[j]
        if ci != cj:
            dag[ci].add(cj)
    return Condensation(
        components, component_of, {c: frozenset(s) for c, s in dag.items()}
    )


def sink_components(g: KnowledgeGraph) -> list[frozenset[ProcessId]]:
    return strongly_connected_components(g).sinks()


def underlying_connected(g: KnowledgeGraph) -> bool:
    if len(g) == 0:
        return False
    undirected: dict[int, set[int]] = {v: set() for v in g.vertices}
    for i, j in g.edges:
        undirected[i].add(j)
        undirected[j].add(i)
    start = min(g.vertices)
    seen = {start}
    todo = [start]
    while todo:
        for w in undirected[todo.pop()]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return len(seen) == len(g)


# -- node-disjoint paths -----------------------------------------------------


def node_disjoint_path_count(g: KnowledgeGraph, source: ProcessId, target: ProcessId) -> int:
    """Maximum number of ``source``-``target`` paths sharing no internal vertex.

    Unit-capacity max flow on the vertex-split graph: every vertex other than
    the endpoints becomes ``v_in -> v_out`` with capacity 1.  A direct edge
    ``source -> target`` contributes exactly one path.
    """
    if source == target:
        raise SamePairError(f"source and target are both {source}")
    for v in (source, target):
        if v not in g.vertices:
            raise GraphError(f"{v} is not a vertex")

    # node encoding: (v, 0) = v_in, (v, 1) = v_out
    cap: dict[tuple, dict[tuple, int]] = {}

    def arc(a, b, c):
        cap.setdefault(a, {})
        cap.setdefault(b, {})
        cap[a][b] = cap[a].get(b, 0) + c
        cap[b].setdefault(a, 0)

    for v in g.vertices:
        if v not in (source, target):
            arc((v, 0), (v, 1), 1)
    for i, j in g.edges:
        if j == source or i == target:
            continue
        tail = (i, 1) if i != source else (source, 1)
        head = (j, 0) if j != target else (target, 0)
        arc(tail, head, 1)

    s, t = (source, 1), (target, 0)
    if s not in cap or t not in cap:
        return 0
    flow = 0
    while True:
        parent = {s: None}
        queue = deque([s])
        while queue and t not in parent:
            u = queue.popleft()
            for w, c in sorted(cap[u].items()):
                if c > 0 and w not in parent:
                    parent[w] = u
                    queue.append(w)
        if t not in parent:
            return flow
        w = t
        while parent[w] is not None:
            u = parent[w]
            cap[u][w] -= 1
            cap[w][u] += 1
            w = u
        flow += 1


def is_k_strongly_connected(g: KnowledgeGraph, k: int) -> tuple[bool, tuple | None]:
    """``(holds, witness)``; witness is an offending ordered pair or the vertex set.

    Graphs with at most ``k`` vertices are rejected for ``k >= 2``; a single
    vertex counts as 1-strongly connected.
    """
    verts = g.sorted_vertices()
    if not verts:
        return False, ()
    if k >= 2 and len(verts) < k + 1:
        return False, tuple(verts)
    for i, j in itertools.permutations(verts, 2):
        if node_disjoint_path_count(g, i, j) < k:
            return False, (i, j)
    return True, None


class Violation(str, Enum):
    NOT_CONNECTED = "not-connected"
    SINK_COUNT = "sink-count-not-one"
    SINK_NOT_K_CONNECTED = "sink-not-k-connected"
    INSUFFICIENT_PATHS = "insufficient-paths-to-sink"


@dataclass(frozen=True)
class OsrReport:
    k: int
    holds: bool
    violated_condition: Violation | None = None
    witness: tuple | None = None
    sink: frozenset[ProcessId] = field(default_factory=frozenset)

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "holds": self.holds,
            "violated_condition": None
            if self.violated_condition is None
            else self.violated_condition.value,
            "witness": None if self.witness is None else _plain(self.witness),
            "sink": sorted(self.sink),
        }


def _plain(x):
    if isinstance(x, (set, frozenset)):
        return sorted(_plain(v) for v in x)
    if isinstance(x, (tuple, list)):
        return [_plain(v) for v in x]
    return x


def check_k_osr(g: KnowledgeGraph, k: int) -> OsrReport:
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if not underlying_connected(g):
        return OsrReport(k, False, Violation.NOT_CONNECTED, None)
    sinks = sink_components(g)
    if len(sinks) != 1:
        return OsrReport(k, False, Violation.SINK_COUNT, tuple(sinks))
    (sink,) = sinks
    ok, witness = is_k_strongly_connected(g.induced(sink), k)
    if not ok:
        return OsrReport(k, False, Violation.SINK_NOT_K_CONNECTED, witness, sink)
    for i in g.sorted_vertices():
        if i in sink:
            continue
        for j in sorted(sink):
            if node_disjoint_path_count(g, i, j) < k:
                return OsrReport(k, False, Violation.INSUFFICIENT_PATHS, (i, j), sink)
    return OsrReport(k, True, None, None, sink)


def is_byzantine_safe(g: KnowledgeGraph, fa: FaultAssignment) -> bool:
    fa.check_against(g)
    rest = g.without(fa.faulty)
    if len(rest) == 0:
        return False
    return check_k_osr(rest, fa.f + 1).holds


def safe_failure_patterns(
    g: KnowledgeGraph, f: int, max_vertices: int = 12
) -> dict[frozenset[ProcessId], bool]:
    """Byzantine-safety for every ``F`` with ``|F| <= f``, keyed by ``F``."""
    if len(g) > max_vertices:
        raise GenerationError(
            f"exhaustive safety check limited to {max_vertices} vertices, got {len(g)}"
        )
    out = {}
    for size in range(f + 1):
        for faulty in itertools.combinations(g.sorted_vertices(), size):
            fs = frozenset(faulty)
            out[fs] = is_byzantine_safe(g, FaultAssignment(f, fs))
    return out


def is_f_reachable(
    g: KnowledgeGraph, fa: FaultAssignment, source: ProcessId, target: ProcessId
) -> bool:
    if source == target:
        raise SamePairError(f"source and target are both {source}")
    if source in fa.faulty or target in fa.faulty:
        raise FaultAssignmentError("f-reachability is defined between correct processes")
    return node_disjoint_path_count(g.without(fa.faulty), source, target) >= fa.f + 1


# -- generation --------------------------------------------------------------


def generate_k_osr(
    n_sink: int,
    n_nonsink: int,
    k: int,
    seed: int,
    *,
    extra_edge_p: float = 0.25,
    retries: int = 50,
) -> KnowledgeGraph:
    """Random k-OSR graph with ids ``1..n_sink + n_nonsink``.

    The sink is a circulant digraph (each member points at its next ``k``
    members in a seeded cyclic order) plus random chords.  Every non-sink
    vertex points at ``k`` distinct sink members, plus random edges to other
    non-sink vertices.  Sink members never point outside the sink.
    """
    if k < 1:
        raise GenerationError(f"k must be positive, got {k}")
    if n_sink < k + 1:
        raise GenerationError(f"a {k}-strongly connected sink needs at least {k + 1} members")
    if n_nonsink < 0:
        raise GenerationError("n_nonsink must be non-negative")
    rng = random.Random(seed)
    n = n_sink + n_nonsink
    for _ in range(retries):
        ids = list(range(1, n + 1))
        rng.shuffle(ids)
        sink, nonsink = ids[:n_sink], ids[n_sink:]
        pd: dict[int, set[int]] = {v: set() for v in ids}
        for pos, v in enumerate(sink):
            for step in range(1, k + 1):
                pd[v].add(sink[(pos + step) % n_sink])
            for w in sink:
                if w != v and rng.random() < extra_edge_p:
                    pd[v].add(w)
        for v in nonsink:
            pd[v].update(rng.sample(sink, k))
            for w in nonsink:
                if w != v and rng.random() < extra_edge_p:
                    pd[v].add(w)
        g = KnowledgeGraph(pd)
        if check_k_osr(g, k).holds:
            return g
    raise GenerationError(f"no {k}-OSR graph found in {retries} attempts")
