import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import all_slices
from stellarcup.errors import TooFewNeighborsError, ViewTooSmallError
from stellarcup.slice_builder import (
    SinkResult,
    avoids_every_fault_set,
    local_slices,
    sd_slices,
    sink_slice_size,
)


def test_local_slices_of_fig2_process_5():
    ss = local_slices(5, {1, 6, 7}, 1)
    assert (ss.base, ss.size) == ({1, 6, 7}, 2)
    assert set(all_slices(ss)) == {frozenset({1, 6}), frozenset({1, 7}), frozenset({6, 7})}


def test_local_slices_single_neighbour():
    ss = local_slices(2, {4}, 0)
    assert all_slices(ss) == [frozenset({4})]
    assert ss.tolerated_faults() == 0


def test_local_slices_need_a_neighbour():
    with pytest.raises(TooFewNeighborsError):
        local_slices(1, set(), 0)


def test_local_slices_pd_of_size_f_plus_one_has_no_margin_for_two_faults():
    ss = local_slices(1, {2, 3}, 1)
    assert ss.tolerated_faults() == 1
    assert not avoids_every_fault_set(ss, 2)


@given(st.sets(st.integers(1, 12), min_size=1, max_size=8), st.integers(0, 3))
def test_local_slices_stay_inside_pd(pd, f):
    ss = local_slices(0, pd, f)
    assert all(s <= pd for s in all_slices(ss))
    assert ss.tolerated_faults() == (1 if len(pd) > 1 else 0)


@pytest.mark.parametrize(
    "in_sink,view,f,size",
    [(True, {1, 2, 3, 4}, 1, 3), (False, {1, 2, 3}, 1, 2), (True, {5, 6, 7, 8}, 1, 3)],
)
def test_sd_slices_examples(in_sink, view, f, size):
    ss = sd_slices(9, SinkResult(in_sink, view), f)
    assert (ss.base, ss.size) == (view, size)


def test_sd_slices_view_too_small():
    with pytest.raises(ViewTooSmallError):
        sd_slices(1, SinkResult(False, {2}), 1)
    with pytest.raises(ViewTooSmallError):
        sd_slices(1, SinkResult(True, {1, 2}), 2)


@given(st.integers(1, 40), st.integers(0, 8))
def test_sink_slice_size_is_the_ceiling(v, f):
    s = sink_slice_size(v, f)
    assert 2 * s >= v + f + 1 > 2 * (s - 1)


@given(st.integers(1, 10), st.integers(0, 3), st.booleans())
def test_sd_slices_avoid_every_small_fault_set(v, f, in_sink):
    view = frozenset(range(1, v + 1))
    try:
        ss = sd_slices(0, SinkResult(in_sink, view), f)
    except ViewTooSmallError:
        return
    slices = all_slices(ss)
    assert all(s <= view for s in slices)
    if v >= ss.size + f:
        for b in (set(c) for r in range(f + 1) for c in itertools.combinations(view, r)):
            assert any(not s & b for s in slices)
        assert avoids_every_fault_set(ss, f)


def test_sink_result_round_trip():
    r = SinkResult(True, {3, 1})
    assert SinkResult.from_dict(r.as_dict()) == r
