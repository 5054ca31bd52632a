import itertools
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stellarcup.errors import NoDecisionError
from stellarcup.graph_core import FaultAssignment, KnowledgeGraph, generate_k_osr, is_f_reachable
from stellarcup.messages import Kind, get_sink_copy
from stellarcup.protocols import (
    DetectorRuntime,
    ReachableBroadcast,
    has_disjoint_family,
    run_sink_detection,
)
from stellarcup.scenario import FIG1_PD, FIG2_PD
from stellarcup.simnet import Arbitrary, EquivocateSink, Network, Silent, SimConfig
from stellarcup.slice_builder import SinkResult

FIG1 = KnowledgeGraph(FIG1_PD)
FIG2 = KnowledgeGraph(FIG2_PD)
FIG1_SINK = frozenset({5, 6, 7, 8})


class RrbNode:
    """Runs nothing but the broadcast; the origin broadcasts at start."""

    def __init__(self, pid, f, broadcasts=()):
        self.rrb = ReachableBroadcast(pid, f)
        self.broadcasts = broadcasts

    def start(self, ctx):
        for tag in self.broadcasts:
            self.rrb.broadcast(ctx, tag)

    def receive(self, ctx, sender, msg):
        if msg.kind is Kind.GET_SINK:
            self.rrb.receive(ctx, sender, msg)


def broadcast_run(g, f, origin, tag, behaviors=None, seed=0):
    nodes = {p: RrbNode(p, f, (tag,) if p == origin else ()) for p in g.vertices}
    net = Network(nodes, {p: g.pd(p) for p in g.vertices}, behaviors, SimConfig(seed=seed))
    net.run()
    return nodes, net


# -- disjoint families -------------------------------------------------------


def brute_disjoint(sets, k):
    sets = list(set(sets))
    return any(
        all(not (a & b) for a, b in itertools.combinations(combo, 2))
        for combo in itertools.combinations(sets, k)
    ) if len(sets) >= k else k == 0


@given(st.lists(st.frozensets(st.integers(1, 6), max_size=3), max_size=7), st.integers(0, 4))
def test_disjoint_family_matches_brute_force(sets, k):
    assert has_disjoint_family(sets, k) == brute_disjoint(sets, k)


# -- reachable-reliable broadcast --------------------------------------------


def test_f_zero_delivers_on_first_copy():
    g = KnowledgeGraph({1: [2], 2: [3], 3: []})
    nodes, _ = broadcast_run(g, 0, 1, "m")
    assert nodes[2].rrb.delivered == [(1, "m")]
    assert nodes[3].rrb.delivered == [(1, "m")]


@pytest.mark.parametrize("faulty", [set(), {6}, {2}])
def test_fig2_sink_delivers_broadcast_from_5(faulty):
    behaviors = {z: Silent() for z in faulty}
    nodes, _ = broadcast_run(FIG2, 1, 5, "GET_SINK", behaviors)
    for p in {1, 2, 3, 4} - faulty:
        assert nodes[p].rrb.delivered == [(5, "GET_SINK")]


def test_single_path_is_not_enough_for_f_one():
    g = KnowledgeGraph({1: [2], 2: [3], 3: []})
    nodes, _ = broadcast_run(g, 1, 1, "m")
    assert nodes[3].rrb.delivered == []


def test_tampering_relay_cannot_forge():
    g = generate_k_osr(5, 3, 2, seed=3)
    origin = min(g.vertices)
    relay = min(g.pd(origin))
    fa = FaultAssignment(1, {relay})

    def tamper(to, msg):
        if msg.kind is Kind.GET_SINK:
            return [replace(msg, body="FORGED")]
        return [msg]

    nodes, _ = broadcast_run(g, 1, origin, "m", {relay: Arbitrary(rewrite=tamper)}, seed=5)
    assert any(nodes[p].rrb.evidence[(origin, "FORGED")] for p in g.vertices)
    for p in sorted(g.vertices - {relay, origin}):
        assert (origin, "FORGED") not in nodes[p].rrb.delivered
        if is_f_reachable(g, fa, origin, p):
            assert nodes[p].rrb.delivered == [(origin, "m")]


def test_malformed_paths_are_ignored():
    script = (
        (2, get_sink_copy(1, 3, (3,))),  # path does not end at the sender
        (2, get_sink_copy(1, 1, (1, 1))),  # not simple
        (2, get_sink_copy(1, 1, (1, 2))),  # already visits the receiver
    )
    g = KnowledgeGraph({1: [2], 2: [], 3: []})
    nodes = {1: RrbNode(1, 0), 2: RrbNode(2, 0), 3: RrbNode(3, 0)}
    Network(nodes, {1: [2]}, {1: Arbitrary(script=script)}).run()
    assert nodes[2].rrb.delivered == []
    assert len(nodes[2].rrb.malformed) == 3


# -- sink discovery and get_sink ---------------------------------------------


@pytest.mark.parametrize("seed", range(4))
def test_fig1_without_faults(seed):
    run = run_sink_detection(FIG1, FaultAssignment(1), config=SimConfig(seed=seed))
    for p in FIG1.vertices:
        assert run.results[p] == SinkResult(p in FIG1_SINK, FIG1_SINK)


@pytest.mark.parametrize("seed", range(4))
def test_fig1_with_silent_8(seed):
    run = run_sink_detection(FIG1, FaultAssignment(1, {8}), {8: Silent()}, SimConfig(seed=seed))
    for p in range(1, 8):
        assert run.results[p] == SinkResult(p in FIG1_SINK, FIG1_SINK)


def test_fig1_process_1_votes_against_membership():
    run = run_sink_detection(FIG1, FaultAssignment(1))
    votes = [r for r in run.trace.events("sink-vote") if r["process"] == 1]
    assert len(votes) == 1 and votes[0]["in_sink"] is False
    assert votes[0]["differ"] >= 2


@pytest.mark.parametrize("seed", range(4))
def test_fig1_equivocating_8_is_outvoted(seed):
    fake = {p: frozenset({8, p}) for p in range(1, 8)}
    run = run_sink_detection(
        FIG1, FaultAssignment(1, {8}), {8: EquivocateSink(fake)}, SimConfig(seed=seed)
    )
    for p in range(1, 8):
        assert run.results[p] == SinkResult(p in FIG1_SINK, FIG1_SINK)


def test_decisions_happen_once():
    run = run_sink_detection(FIG2, FaultAssignment(1), config=SimConfig(seed=2))
    decided = [r["process"] for r in run.trace.events("decide")]
    assert sorted(decided) == sorted(set(decided)) == list(range(1, 8))


def test_fig2_non_sink_members_answered_indirectly():
    run = run_sink_detection(FIG2, FaultAssignment(1))
    routes = {r["process"]: r["route"] for r in run.trace.events("decide")}
    assert {routes[p] for p in (5, 6, 7)} == {"indirect"}
    assert {routes[p] for p in (1, 2, 3, 4)} == {"direct"}


def test_get_sink_stops_at_decision():
    rt = DetectorRuntime(FIG1, FaultAssignment(1, {8}), {8: Silent()}, SimConfig(seed=1))
    assert rt.get_sink(1) == SinkResult(False, FIG1_SINK)
    assert rt.network.pending > 0
    assert rt.get_sink(5) == SinkResult(True, FIG1_SINK)


def test_get_sink_undecided_raises():
    # two correct processes cannot hold 2f+1 members for f=1
    g = KnowledgeGraph({1: [2], 2: [1]})
    rt = DetectorRuntime(g, FaultAssignment(1))
    with pytest.raises(NoDecisionError):
        rt.get_sink(1)


def test_behaviors_only_for_faulty():
    with pytest.raises(ValueError):
        DetectorRuntime(FIG1, FaultAssignment(1), {8: Silent()})
