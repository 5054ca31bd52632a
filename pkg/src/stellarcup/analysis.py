"""Glue between the modules: ground truth, slice-property checks, corpora, end-to-end runs."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping

from .errors import BudgetExceededError, GenerationError, ViewTooSmallError
from .fbqs import QuorumSpace, SliceSet, maximal_consensus_clusters, with_faulty_defaults
from .graph_core import (
    FaultAssignment,
    KnowledgeGraph,
    ProcessId,
    generate_k_osr,
    is_byzantine_safe,
    is_f_reachable,
    sink_components,
)
from .protocols import DEFAULT_PATH_BUDGET, DetectionRun, run_sink_detection
from .scenario import Scenario
from .simnet import Behavior, EquivocateSink, LieAboutPd, Silent, SimConfig
from .slice_builder import SinkResult, sd_slices, sink_slice_size


def the_sink(g: KnowledgeGraph) -> frozenset[ProcessId]:
    sinks = sink_components(g)
    if len(sinks) != 1:
        raise ValueError(f"graph has {len(sinks)} sink components")
    return sinks[0]


def ground_truth_results(g: KnowledgeGraph) -> dict[ProcessId, SinkResult]:
    sink = the_sink(g)
    return {p: SinkResult(p in sink, sink) for p in g.sorted_vertices()}


def sd_slice_system(
    results: Mapping[ProcessId, SinkResult | None], f: int, skip: frozenset = frozenset()
) -> dict[ProcessId, SliceSet]:
    return {
        p: sd_slices(p, r, f)
        for p, r in sorted(results.items())
        if r is not None and p not in skip
    }


def has_safe_sink(g: KnowledgeGraph, fa: FaultAssignment) -> bool:
    """Byzantine-safe for F with at least 2f+1 correct sink members."""
    sinks = sink_components(g)
    if len(sinks) != 1:
        return False
    return is_byzantine_safe(g, fa) and len(sinks[0] - fa.faulty) >= 2 * fa.f + 1


def discoverable(g: KnowledgeGraph, fa: FaultAssignment) -> bool:
    """Extra conditions under which direct discovery provably finds the whole sink.

    Removing F leaves exactly the correct part of the sink as the new sink, and
    every faulty sink member is named by at least f+1 correct sink members.
    """
    if not has_safe_sink(g, fa):
        return False
    sink = the_sink(g)
    rest = g.without(fa.faulty)
    if sink_components(rest) != [sink - fa.faulty]:
        return False
    for z in sink & fa.faulty:
        if len((g.predecessors(z) & sink) - fa.faulty) < fa.f + 1:
            return False
    return True


# -- sink-detector slice checks --------------------------------------------------


@dataclass
class SdPropertyReport:
    sink_pairs: bool = True
    mixed_pairs: bool = True
    outside_pairs: bool = True
    intertwined: bool = True
    available: bool = True
    witnesses: list[tuple] = field(default_factory=list)

    @property
    def all_hold(self) -> bool:
        return (
            self.sink_pairs and self.mixed_pairs and self.outside_pairs
            and self.intertwined and self.available
        )


def check_sd_properties(
    g: KnowledgeGraph, fa: FaultAssignment, slices: Mapping[ProcessId, SliceSet]
) -> SdPropertyReport:
    """Quorum-level checks of the sink-detector slice construction.

    Quorums of every correct process are enumerated over the whole graph; the
    pairwise intersections are classified by sink membership.
    """
    sink = the_sink(g)
    space = QuorumSpace(with_faulty_defaults(slices, fa), g.vertices)
    correct = sorted(g.vertices - fa.faulty)
    fams = {p: space.minimal_quorums_of(p) for p in correct}
    rep = SdPropertyReport()
    for x, p in enumerate(correct):
        for q in correct[x:]:
            bad = next(
                ((a, b) for a in fams[p] for b in fams[q] if (a & b).bit_count() <= fa.f),
                None,
            )
            if bad is None:
                continue
            rep.intertwined = False
            rep.witnesses.append(("intersection", p, q, space.unmask(bad[0]), space.unmask(bad[1])))
            in_p, in_q = p in sink, q in sink
            if in_p and in_q:
                rep.sink_pairs = False
            elif in_p or in_q:
                rep.mixed_pairs = False
            else:
                rep.outside_pairs = False
    correct_mask = space.mask(correct)
    for p in correct:
        if not any(m & correct_mask == m for m in fams[p]):
            rep.available = False
            rep.witnesses.append(("availability", p))
    return rep


def sink_slice_chain(v: int, fs: int, f: int) -> dict[str, bool]:
    """The inequality chain behind the all-correct sink slice, in integers.

    ``v`` = sink size, ``fs`` = faulty sink members.  Halves are compared after
    doubling so nothing is rounded.
    """
    s = sink_slice_size(v, f)
    return {
        "slice_fits": v >= fs + s,
        "unrounded": 2 * v >= 2 * fs + v + f + 1,
        "simplified": v >= f + 1 + 2 * fs,
        "faults_within_f": 2 * f + 1 + fs >= f + 1 + 2 * fs,
        "enough_correct": v >= 2 * f + 1 + fs,
    }


def all_correct_sink_quorum(v: int, fs: int, f: int, i_index: int = 0):
    """Build the quorum ``S | {i}`` from the all-correct slice argument.

    Sink ids are ``1..v``, the first ``fs`` are faulty and ``i`` is the
    ``i_index``-th correct member.  Returns ``(quorum, slices, faulty)``.
    """
    ids = list(range(1, v + 1))
    faulty = frozenset(ids[:fs])
    correct = ids[fs:]
    i = correct[i_index]
    size = sink_slice_size(v, f)
    others = [p for p in correct if p != i]
    chosen = others[:size] if len(others) >= size else [i] + others[: size - 1]
    quorum = frozenset(chosen) | {i}
    slices = {p: SliceSet.threshold(p, ids, size) for p in ids}
    return quorum, slices, faulty


# -- corpora -----------------------------------------------------------------


@dataclass
class CorpusCase:
    graph: KnowledgeGraph
    fa: FaultAssignment
    behaviors: dict[ProcessId, Behavior]
    seed: int
    label: str

    def scenario(self) -> Scenario:
        return Scenario(
            name=self.label,
            f=self.fa.f,
            pd=self.graph.as_dict(),
            faulty=self.fa.faulty,
            behaviors=self.behaviors,
            seed=self.seed,
        )


def _random_behavior(rng: random.Random, g: KnowledgeGraph, z: ProcessId, kinds) -> Behavior:
    kind = rng.choice(kinds)
    if kind == "Silent":
        return Silent()
    if kind == "LieAboutPd":
        pd = sorted(g.pd(z))
        return LieAboutPd(frozenset(rng.sample(pd, rng.randint(0, max(len(pd) - 1, 0)))))
    others = sorted(g.vertices - {z})
    targets = rng.sample(others, rng.randint(1, len(others)))
    views = {}
    for t in targets:
        fake = frozenset(rng.sample(sorted(g.vertices), rng.randint(1, len(g))))
        views[t] = fake
    return EquivocateSink(views)


def byzantine_corpus(
    count: int,
    seed: int = 0,
    max_n: int = 10,
    fs=(0, 1),
    kinds=("Silent", "LieAboutPd", "EquivocateSink"),
    accept=discoverable,
) -> list[CorpusCase]:
    """Generated scenarios passing ``accept`` (by default: a safe sink plus
    the conditions for direct discovery)."""
    rng = random.Random(seed)
    out: list[CorpusCase] = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 50 * count + 100:
            raise GenerationError(f"only {len(out)} of {count} corpus cases found")
        f = rng.choice(fs)
        k = rng.choice(sorted({f + 1, 2 * f + 1}))
        n_sink = rng.randint(max(k + 1, 2 * f + 1 + f), min(7, max_n))
        n_nonsink = rng.randint(0, max_n - n_sink)
        gseed = rng.randrange(1 << 30)
        g = generate_k_osr(n_sink, n_nonsink, k, gseed)
        faulty: frozenset = frozenset()
        if f and rng.random() < 0.8:
            faulty = frozenset({rng.choice(g.sorted_vertices())})
        fa = FaultAssignment(f, faulty)
        if not accept(g, fa):
            continue
        behaviors = {z: _random_behavior(rng, g, z, kinds) for z in sorted(faulty)}
        label = f"corpus-{len(out)}-n{len(g)}-f{f}-k{k}-F{sorted(faulty)}"
        out.append(CorpusCase(g, fa, behaviors, rng.randrange(1 << 20), label))
    return out


def undersized_sink_case(seed: int = 0) -> CorpusCase:
    """f = 1 with a 3-member sink holding one silent fault: only 2f correct sink members."""
    g = generate_k_osr(3, 3, 2, seed)
    sink = the_sink(g)
    z = min(sink)
    return CorpusCase(g, FaultAssignment(1, {z}), {z: Silent()}, seed, f"undersized-sink-{seed}")


# -- end to end --------------------------------------------------------------


@dataclass
class SimulationOutcome:
    verdict: bool
    liveness_failure: bool
    run: DetectionRun | None
    slices: dict[ProcessId, SliceSet]
    clusters: list[frozenset[ProcessId]]
    correct: frozenset[ProcessId]
    reason: str = ""


def simulate_scenario(
    sc: Scenario,
    seed: int | None = None,
    budget: int | None = None,
    path_budget: int = DEFAULT_PATH_BUDGET,
) -> SimulationOutcome:
    """get_sink everywhere, slices from the answers, then the cluster verdict."""
    g, fa = sc.graph, sc.faults
    correct = sc.correct
    try:
        run = run_sink_detection(
            g, fa, sc.behaviors_for_run(), sc.sim_config(seed, budget), path_budget
        )
    except BudgetExceededError as exc:
        return SimulationOutcome(False, True, None, {}, [], correct, str(exc))
    undecided = run.undecided()
    if undecided:
        return SimulationOutcome(
            False, True, run, {}, [], correct, f"undecided at quiescence: {undecided}"
        )
    try:
        slices = sd_slice_system(run.results, fa.f, skip=fa.faulty)
    except ViewTooSmallError as exc:
        return SimulationOutcome(False, False, run, {}, [], correct, str(exc))
    if sc.explicit_slices:
        for p in fa.faulty:
            if p in sc.explicit_slices:
                slices[p] = sc.explicit_slices[p]
    clusters = maximal_consensus_clusters(slices, g.vertices, fa)
    verdict = clusters == [correct]
    reason = "" if verdict else f"maximal clusters {[sorted(c) for c in clusters]}"
    return SimulationOutcome(verdict, False, run, slices, clusters, correct, reason)


def def8_violations(
    g: KnowledgeGraph, fa: FaultAssignment, results: Mapping[ProcessId, SinkResult | None]
) -> list[tuple[ProcessId, str]]:
    """Check decided results against the sink-detector contract."""
    sink = the_sink(g)
    bad = []
    for p in sorted(g.vertices - fa.faulty):
        r = results.get(p)
        if r is None:
            bad.append((p, "undecided"))
        elif p in sink and (not r.in_sink or r.view != sink):
            bad.append((p, f"sink member got {r}"))
        elif p not in sink and (
            r.in_sink or not r.view <= sink or len(r.view - fa.faulty) < fa.f + 1
        ):
            bad.append((p, f"non-sink member got {r}"))
    return bad


@dataclass
class RrbReport:
    integrity: list[tuple] = field(default_factory=list)
    agreement: list[tuple] = field(default_factory=list)
    validity: list[ProcessId] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.integrity or self.agreement or self.validity)


def rrb_violations(g: KnowledgeGraph, fa: FaultAssignment, run: DetectionRun) -> RrbReport:
    """Check the broadcast properties of a finished run against the trace and the graph.

    Integrity: every delivery of a correct origin's message matches a broadcast
    it made, and nothing is delivered twice.  Agreement: once any correct
    process delivers a correct origin's message, every correct process
    f-reachable from that origin delivers it too.  Validity: a correct origin
    with at least one f-reachable correct process gets at least one delivery.
    """
    rep = RrbReport()
    correct = sorted(g.vertices - fa.faulty)
    broadcasts = {(r["process"], r["tag"]) for r in run.trace.events("rrb-broadcast")}
    delivered: dict[tuple, set[ProcessId]] = {}
    for p in correct:
        seen = set()
        for key in run.processes[p].rrb.delivered:
            if key in seen:
                rep.integrity.append(("duplicate", p, key))
            seen.add(key)
            if key[0] not in fa.faulty and key not in broadcasts:
                rep.integrity.append(("never broadcast", p, key))
            delivered.setdefault(key, set()).add(p)
    for origin, tag in sorted(broadcasts):
        if origin in fa.faulty:
            continue
        reach = [j for j in correct if j != origin and is_f_reachable(g, fa, origin, j)]
        got = delivered.get((origin, tag), set())
        if reach and not got:
            rep.validity.append(origin)
        if got:
            rep.agreement.extend((origin, tag, j) for j in reach if j not in got)
    return rep
