import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import all_slices, brute_cluster, brute_intertwined, brute_quorums, subsets
from stellarcup.errors import MissingSlicesError, SliceError, UniverseTooLargeError
from stellarcup.fbqs import (
    QuorumSpace,
    SliceSet,
    is_consensus_cluster,
    is_intertwined,
    is_quorum,
    maximal_consensus_clusters,
    quorums_of,
    with_faulty_defaults,
)
from stellarcup.graph_core import FaultAssignment
from stellarcup.scenario import FIG1_SLICES
from stellarcup.slice_builder import local_slices

FIG1_FA = FaultAssignment(1, {8})
FIG1_UNIVERSE = range(1, 9)


@pytest.fixture
def fig1_slices():
    return {i: SliceSet.explicit(i, s) for i, s in FIG1_SLICES.items()}


@st.composite
def slice_systems(draw, max_n=6):
    """Random slice systems mixing explicit and threshold declarations."""
    n = draw(st.integers(2, max_n))
    rng = random.Random(draw(st.integers(0, 2**32 - 1)))
    ids = list(range(1, n + 1))
    out = {}
    for p in ids:
        if rng.random() < 0.5:
            base = rng.sample(ids, rng.randint(1, n))
            out[p] = SliceSet.threshold(p, base, rng.randint(1, len(base)))
        else:
            fam = [rng.sample(ids, rng.randint(1, n)) for _ in range(rng.randint(1, 3))]
            out[p] = SliceSet.explicit(p, fam)
    return out


# -- slice sets --------------------------------------------------------------


def test_threshold_size_checked():
    with pytest.raises(SliceError):
        SliceSet.threshold(1, [2, 3], 3)
    with pytest.raises(SliceError):
        SliceSet.threshold(1, [2, 3], 0)


def test_explicit_needs_nonempty_slices():
    with pytest.raises(SliceError):
        SliceSet.explicit(1, [])
    with pytest.raises(SliceError):
        SliceSet.explicit(1, [[]])


def test_threshold_expands_to_combinations():
    ss = SliceSet.threshold(1, [2, 3, 4], 2)
    assert ss.count() == 3
    assert set(ss.slices()) == {frozenset(c) for c in itertools.combinations([2, 3, 4], 2)}
    assert ss.expand().family == SliceSet.explicit(1, ss.slices()).family


@given(st.sets(st.integers(1, 8), min_size=1, max_size=6), st.data())
def test_threshold_and_explicit_agree(base, data):
    size = data.draw(st.integers(1, len(base)))
    thr = SliceSet.threshold(0, base, size)
    exp = thr.expand()
    for q in subsets(set(base) | {9}):
        assert thr.satisfied_by(q) == exp.satisfied_by(q)
    assert thr.tolerated_faults() == exp.tolerated_faults() == len(base) - size


def test_serialization_round_trip():
    for ss in (SliceSet.threshold(3, [1, 2, 4], 2), SliceSet.explicit(3, [[1], [2, 4]])):
        assert SliceSet.from_dict(3, ss.as_dict()) == ss
    assert SliceSet.from_dict(1, [[2, 5]]) == SliceSet.explicit(1, [[2, 5]])


# -- quorums -----------------------------------------------------------------


def test_is_quorum_on_fig1(fig1_slices):
    slices = with_faulty_defaults(fig1_slices, FIG1_FA)
    assert is_quorum({5, 6, 7}, slices)
    assert is_quorum({3, 5, 6, 7}, slices)
    assert not is_quorum({3, 5}, slices)
    assert is_quorum(set(), slices)


def test_is_quorum_needs_slices(fig1_slices):
    with pytest.raises(MissingSlicesError):
        is_quorum({8}, fig1_slices)


def test_fig1_quorum_of_3(fig1_slices):
    qs = quorums_of(3, with_faulty_defaults(fig1_slices, FIG1_FA), FIG1_UNIVERSE, minimal_only=True)
    assert qs == [frozenset({3, 5, 6, 7})]


@given(slice_systems())
def test_quorums_match_brute_force(slices):
    universe = sorted(slices)
    space = QuorumSpace(slices, universe)
    assert {space.unmask(m) for m in space.quorums()} == set(brute_quorums(slices, universe))
    for p in universe:
        expected = [q for q in brute_quorums(slices, universe) if p in q]
        assert set(quorums_of(p, slices, universe)) == set(expected)


@given(slice_systems())
def test_union_of_quorums_is_quorum(slices):
    universe = sorted(slices)
    qs = quorums_of(universe[0], slices, universe)[:8]
    for a, b in itertools.combinations(qs, 2):
        assert is_quorum(a | b, slices)


@given(slice_systems())
def test_minimal_quorums_are_minimal_and_cover(slices):
    universe = sorted(slices)
    p = universe[0]
    full = quorums_of(p, slices, universe)
    minimal = quorums_of(p, slices, universe, minimal_only=True)
    assert set(minimal) <= set(full)
    for q in full:
        assert any(m <= q for m in minimal)
    for a, b in itertools.permutations(minimal, 2):
        assert not a < b


def test_universe_bound():
    slices = {i: SliceSet.explicit(i, [[i]]) for i in range(1, 6)}
    with pytest.raises(UniverseTooLargeError):
        quorums_of(1, slices, range(1, 6), bound=4)


# -- intertwined, clusters ---------------------------------------------------


def fig2_local_slices():
    from stellarcup.scenario import FIG2_PD

    return {p: local_slices(p, pd, 1) for p, pd in FIG2_PD.items()}


def test_fig2_local_slices_not_intertwined():
    res = is_intertwined({1, 5}, fig2_local_slices(), range(1, 8), FaultAssignment(1))
    assert not res
    assert res.members == (1, 5)
    assert res.quorums == (frozenset({1, 2, 3}), frozenset({5, 6, 7}))


def test_fig2_clusters_split():
    clusters = maximal_consensus_clusters(fig2_local_slices(), range(1, 8), FaultAssignment(1))
    assert clusters == [frozenset({5, 6, 7}), frozenset({1, 2, 3, 4})]


def test_fig1_clusters(fig1_slices):
    for cand in ({5, 6, 7}, set(range(1, 8))):
        assert is_consensus_cluster(cand, fig1_slices, FIG1_UNIVERSE, FIG1_FA).is_cluster
    assert maximal_consensus_clusters(fig1_slices, FIG1_UNIVERSE, FIG1_FA) == [frozenset(range(1, 8))]


def test_unavailable_member_reported(fig1_slices):
    rep = is_consensus_cluster({3, 5}, fig1_slices, FIG1_UNIVERSE, FIG1_FA)
    assert not rep.available and rep.unavailable_member == 3


def test_threshold_and_strict_forms():
    # the only quorums of 1 and 2 meet in process 3
    slices = {
        1: SliceSet.explicit(1, [[1, 3]]),
        2: SliceSet.explicit(2, [[2, 3]]),
        3: SliceSet.explicit(3, [[3]]),
    }
    assert is_intertwined({1, 2}, slices, [1, 2, 3], FaultAssignment(0))
    assert not is_intertwined({1, 2}, slices, [1, 2, 3], FaultAssignment(1))
    # one common process is enough for the strict form, unless it is faulty
    assert is_intertwined({1, 2}, slices, [1, 2, 3], FaultAssignment(1), strict=True)
    assert not is_intertwined({1, 2}, slices, [1, 2, 3], FaultAssignment(1, {3}), strict=True)


@given(slice_systems(max_n=5), st.integers(0, 1))
def test_intertwined_matches_brute_force(slices, f):
    universe = sorted(slices)
    fa = FaultAssignment(f)
    for a, b in itertools.combinations_with_replacement(universe, 2):
        got = is_intertwined({a, b}, slices, universe, fa).holds
        assert got == brute_intertwined([a, b], slices, universe, f)


@given(slice_systems(max_n=5), st.integers(0, 1), st.data())
def test_intertwined_symmetric_and_monotone(slices, f, data):
    universe = sorted(slices)
    fa = FaultAssignment(f)
    a = data.draw(st.sampled_from(universe))
    b = data.draw(st.sampled_from(universe))
    assert is_intertwined({a, b}, slices, universe, fa).holds == is_intertwined({b, a}, slices, universe, fa).holds
    big = set(data.draw(st.sets(st.sampled_from(universe), min_size=1)))
    if is_intertwined(big, slices, universe, fa):
        for sub in subsets(big):
            assert is_intertwined(sub, slices, universe, fa)


@given(slice_systems(max_n=5), st.integers(0, 1))
def test_maximal_clusters_match_brute_force(slices, f):
    universe = sorted(slices)
    fa = FaultAssignment(f)
    clusters = [c for c in subsets(universe) if brute_cluster(c, slices, universe, f)]
    maximal = {c for c in clusters if not any(c < d for d in clusters)}
    assert set(maximal_consensus_clusters(slices, universe, fa)) == maximal
    for c in clusters:
        assert is_consensus_cluster(c, slices, universe, fa).is_cluster


def test_faulty_processes_get_trivial_slice(fig1_slices):
    filled = with_faulty_defaults(fig1_slices, FIG1_FA)
    assert all_slices(filled[8]) == [frozenset({8})]
    assert filled[1] is fig1_slices[1]
