"""Sink discovery, reachable-reliable broadcast and the sink detector.

Each piece is an event-driven state machine owned by one process.  The
``SinkDetectorProcess`` composes them and plugs into :mod:`stellarcup.simnet`.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import NoDecisionError
from .graph_core import FaultAssignment, KnowledgeGraph, ProcessId
from .messages import (
    Kind,
    ProtocolMessage,
    discover,
    get_sink_copy,
    known_exchange,
    pd_reply,
    sink_reply,
)
from .simnet import Behavior, Context, Network, SimConfig, Trace
from .slice_builder import SinkResult

GET_SINK_TAG = "GET_SINK"
DEFAULT_PATH_BUDGET = 256


def has_disjoint_family(sets: Iterable[frozenset], k: int) -> bool:
    """Are there ``k`` pairwise disjoint sets among ``sets``?  Exact backtracking."""
    if k <= 0:
        return True
    pool = sorted(set(sets), key=lambda s: (len(s), sorted(s)))
    if len(pool) < k:
        return False

    def search(start: int, used: frozenset, need: int) -> bool:
        if need == 0:
            return True
        for x in range(start, len(pool)):
            if len(pool) - x < need:
                return False
            s = pool[x]
            if not (s & used) and search(x + 1, used | s, need - 1):
                return True
        return False

    return search(0, frozenset(), k)


# -- SINK: direct discovery --------------------------------------------------


class SinkDiscovery:
    """Breadth-first discovery of the reachable set, then the known-set vote.

    ``known`` includes the owner.  The search reaches its fixpoint once at most
    ``f`` known processes have not answered DISCOVER and at least ``2f + 1``
    processes are known (no sink is smaller); the frozen set is then
    sent to everyone the owner can address.  The vote only counts exchanges
    from members of the frozen set: ``|known| - f`` equal sets (own included)
    mean sink membership, ``f + 1`` different ones mean the opposite.
    """

    def __init__(self, pid: ProcessId, pd: Iterable[ProcessId], f: int):
        self.pid = pid
        self.pd = frozenset(pd) - {pid}
        self.f = f
        self.known: set[ProcessId] = {pid} | self.pd
        self.replies: dict[ProcessId, frozenset[ProcessId]] = {}
        self.frozen: frozenset[ProcessId] | None = None
        self.exchanges: dict[ProcessId, frozenset[ProcessId]] = {}
        self.exchanged_to: set[ProcessId] = set()
        self.result: bool | None = None
        self.malformed: list[tuple[ProcessId, str]] = []

    @property
    def at_fixpoint(self) -> bool:
        return self.frozen is not None

    def start(self, ctx: Context) -> None:
        for j in sorted(self.pd):
            ctx.send(j, discover(self.pid))
        self.progress(ctx)

    def receive(self, ctx: Context, sender: ProcessId, msg: ProtocolMessage) -> None:
        if msg.kind is Kind.DISCOVER:
            ctx.send(sender, pd_reply(self.pid, self.pd))
        elif msg.kind is Kind.PD_REPLY:
            self._on_pd_reply(ctx, sender, msg)
        elif msg.kind is Kind.KNOWN_EXCHANGE:
            if not isinstance(msg.body, frozenset):
                self.malformed.append((sender, "KNOWN_EXCHANGE without a set"))
            elif sender not in self.exchanges:
                self.exchanges[sender] = msg.body
        self.progress(ctx)

    def _on_pd_reply(self, ctx, sender, msg):
        if not isinstance(msg.body, frozenset):
            self.malformed.append((sender, "PD_REPLY without a set"))
            return
        if self.frozen is not None or sender in self.replies or sender not in self.known:
            return
        self.replies[sender] = msg.body
        fresh = sorted(msg.body - self.known - {self.pid})
        self.known.update(fresh)
        ctx.learn(fresh)
        for j in fresh:
            ctx.send(j, discover(self.pid))

    def progress(self, ctx: Context) -> None:
        """Check the fixpoint, send the frozen set to new contacts, re-run the vote."""
        if self.frozen is None:
            unanswered = self.known - set(self.replies) - {self.pid}
            if len(unanswered) > self.f or len(self.known) < 2 * self.f + 1:
                return
            self.frozen = frozenset(self.known)
            ctx.record("fixpoint", known=sorted(self.frozen))
        for j in sorted(ctx.known - self.exchanged_to):
            self.exchanged_to.add(j)
            ctx.send(j, known_exchange(self.pid, self.frozen))
        if self.result is None:
            self._vote(ctx)

    def _vote(self, ctx: Context) -> None:
        members = self.frozen
        same = 1 + sum(1 for j, s in self.exchanges.items() if j in members and s == members)
        differ = sum(1 for j, s in self.exchanges.items() if j in members and s != members)
        if same >= len(members) - self.f:
            self.result = True
        elif differ >= self.f + 1:
            self.result = False
        else:
            return
        ctx.record("sink-vote", in_sink=self.result, same=same, differ=differ)


# -- reachable-reliable broadcast --------------------------------------------


class ReachableBroadcast:
    """Path-recording flood with ``f + 1`` internally disjoint path evidence.

    A copy of ``(origin, tag)`` travelling along ``path`` vouches through the
    internal vertices ``path[1:]``.  A receiver delivers once the recorded
    internal sets contain ``f + 1`` pairwise disjoint members; since at most
    ``f`` processes lie, one of those copies crossed correct processes only.
    Before delivering, a relay forwards every copy whose internal set is not a
    superset of one it already forwarded; on delivery it forwards the single
    path ``(origin, self)`` and goes quiet for that message.
    """

    def __init__(self, pid: ProcessId, f: int, path_budget: int = DEFAULT_PATH_BUDGET):
        self.pid = pid
        self.f = f
        self.path_budget = path_budget
        self.evidence: dict[tuple, set[frozenset]] = defaultdict(set)
        self.forwarded: dict[tuple, list[frozenset]] = defaultdict(list)
        self.delivered: list[tuple[ProcessId, str]] = []
        self._delivered_set: set[tuple] = set()
        self.own: dict[str, set[ProcessId]] = {}
        self.budget_warnings: int = 0
        self.malformed: list[tuple[ProcessId, str]] = []

    def broadcast(self, ctx: Context, tag: str) -> None:
        self.own.setdefault(tag, set())
        ctx.record("rrb-broadcast", tag=tag)
        self.extend(ctx)

    def extend(self, ctx: Context) -> None:
        """Send own broadcasts to processes learned since the last call."""
        for tag, sent in self.own.items():
            for j in sorted(ctx.known - sent):
                sent.add(j)
                ctx.send(j, get_sink_copy(self.pid, self.pid, (self.pid,), tag))

    def receive(self, ctx: Context, sender: ProcessId, msg: ProtocolMessage) -> tuple | None:
        path = msg.path
        reason = None
        if not path or msg.origin is None or path[0] != msg.origin:
            reason = "path does not start at origin"
        elif path[-1] != sender:
            reason = "path does not end at sender"
        elif len(set(path)) != len(path):
            reason = "path is not simple"
        elif self.pid in path:
            reason = "path already visits receiver"
        if reason is not None:
            if msg.origin != self.pid:
                self.malformed.append((sender, reason))
            return None
        key = (msg.origin, msg.body)
        if key in self._delivered_set:
            return None
        internal = frozenset(path[1:])
        if internal in self.evidence[key]:
            return None
        self.evidence[key].add(internal)
        if has_disjoint_family(self.evidence[key], self.f + 1):
            self._delivered_set.add(key)
            self.delivered.append(key)
            ctx.learn([msg.origin])
            ctx.record("rrb-deliver", origin=msg.origin, tag=msg.body)
            self._forward(ctx, key, (msg.origin,), frozenset())
            return key
        self._forward(ctx, key, path, internal)
        return None

    def _forward(self, ctx, key, path, internal):
        done = self.forwarded[key]
        if any(prev <= internal for prev in done):
            return
        if len(done) >= self.path_budget:
            self.budget_warnings += 1
            ctx.record("rrb-path-budget", origin=key[0], tag=key[1])
            return
        done.append(internal)
        out = tuple(path) + (self.pid,)
        for j in sorted(ctx.known - set(out)):
            ctx.send(j, get_sink_copy(self.pid, key[0], out, key[1]))


# -- sink detector -----------------------------------------------------------


class SinkDetectorProcess:
    """One process running ``get_sink``: direct discovery plus the indirect route.

    At start it broadcasts GET_SINK and begins discovery.  A SINK_REPLY view
    seen from ``f + 1`` distinct senders is adopted as the sink.  Once direct
    discovery votes for membership the process adopts its known set (unless
    already decided) and answers every asker, present and future.
    """

    def __init__(self, pid: ProcessId, pd: Iterable[ProcessId], f: int,
                 path_budget: int = DEFAULT_PATH_BUDGET):
        self.pid = pid
        self.f = f
        self.discovery = SinkDiscovery(pid, pd, f)
        self.rrb = ReachableBroadcast(pid, f, path_budget)
        self.sink: frozenset[ProcessId] | None = None
        self.decided: SinkResult | None = None
        self.asked: set[ProcessId] = set()
        self.answered: set[ProcessId] = set()
        self.values: dict[frozenset, set[ProcessId]] = defaultdict(set)
        self.serving = False

    def start(self, ctx: Context) -> None:
        self.rrb.broadcast(ctx, GET_SINK_TAG)
        self.discovery.start(ctx)
        self._after(ctx)

    def receive(self, ctx: Context, sender: ProcessId, msg: ProtocolMessage) -> None:
        if msg.kind is Kind.GET_SINK:
            key = self.rrb.receive(ctx, sender, msg)
            if key is not None and key[1] == GET_SINK_TAG:
                self.asked.add(key[0])
        elif msg.kind is Kind.SINK_REPLY:
            if isinstance(msg.body, frozenset) and msg.body:
                self.values[msg.body].add(sender)
                if self.sink is None and len(self.values[msg.body]) > self.f:
                    self._decide(ctx, msg.body, "indirect")
        else:
            self.discovery.receive(ctx, sender, msg)
        self._after(ctx)

    def _after(self, ctx: Context) -> None:
        self.discovery.progress(ctx)
        if self.discovery.result is True and not self.serving:
            self.serving = True
            if self.sink is None:
                self._decide(ctx, self.discovery.frozen, "direct")
        if self.serving:
            for j in sorted(self.asked - self.answered):
                self.answered.add(j)
                ctx.learn([j])
                ctx.send(j, sink_reply(self.pid, self.sink))
        self.rrb.extend(ctx)

    def _decide(self, ctx: Context, view: frozenset, route: str) -> None:
        self.sink = frozenset(view)
        self.decided = SinkResult(self.pid in self.sink, self.sink)
        ctx.record("decide", in_sink=self.decided.in_sink, view=sorted(self.sink), route=route)


@dataclass
class DetectionRun:
    """Outcome of one sink-detector simulation."""

    results: dict[ProcessId, SinkResult | None]
    processes: dict[ProcessId, SinkDetectorProcess]
    trace: Trace
    faulty: frozenset[ProcessId] = field(default_factory=frozenset)

    def correct_results(self) -> dict[ProcessId, SinkResult | None]:
        return {p: r for p, r in self.results.items() if p not in self.faulty}

    def undecided(self) -> list[ProcessId]:
        return sorted(p for p, r in self.correct_results().items() if r is None)


class DetectorRuntime:
    """Every process of a knowledge graph running the sink detector on one network."""

    def __init__(
        self,
        graph: KnowledgeGraph,
        fa: FaultAssignment,
        behaviors: Mapping[ProcessId, Behavior] | None = None,
        config: SimConfig = SimConfig(),
        path_budget: int = DEFAULT_PATH_BUDGET,
    ):
        fa.check_against(graph)
        behaviors = dict(behaviors or {})
        stray = set(behaviors) - fa.faulty
        if stray:
            raise ValueError(f"behaviors attached to correct processes {sorted(stray)}")
        self.graph = graph
        self.fa = fa
        self.processes = {
            p: SinkDetectorProcess(p, graph.pd(p), fa.f, path_budget)
            for p in graph.sorted_vertices()
        }
        self.network = Network(
            self.processes, {p: graph.pd(p) for p in graph.vertices}, behaviors, config
        )

    def get_sink(self, pid: ProcessId) -> SinkResult:
        """Drive the network until ``pid`` decides."""
        proc = self.processes[pid]
        self.network.run(stop=lambda: proc.decided is not None)
        if proc.decided is None:
            raise NoDecisionError(f"process {pid} is undecided at quiescence")
        return proc.decided

    def run(self) -> DetectionRun:
        trace = self.network.run()
        return DetectionRun(
            {p: proc.decided for p, proc in self.processes.items()},
            self.processes,
            trace,
            self.fa.faulty,
        )


def run_sink_detection(
    graph: KnowledgeGraph,
    fa: FaultAssignment,
    behaviors: Mapping[ProcessId, Behavior] | None = None,
    config: SimConfig = SimConfig(),
    path_budget: int = DEFAULT_PATH_BUDGET,
) -> DetectionRun:
    return DetectorRuntime(graph, fa, behaviors, config, path_budget).run()
