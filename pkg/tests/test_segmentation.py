from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ev
from oracles import window_counts
from rigkit.graph import build_graph
from rigkit.segmentation import (
    INFINITE,
    UNIT,
    SyscallIndexError,
    edge_vectors,
    infinite_edge_matrix,
    segment_log,
    segments_to_csv,
)

W = 16


def _events(pairs):
    return [ev(t, s, "1", "/x") for t, s in pairs]


def test_two_events_one_window():
    [v] = segment_log(_events([(0.0, 3), (1.0, 4)]), 10, 10, W)
    expected = np.zeros(W, dtype=int)
    expected[[3, 4]] = 1
    assert np.array_equal(v.counts, expected)


def test_window_ignores_which_resources_are_involved():
    # four events in one window over two unrelated pairs of resources
    events = [ev(5.0, 1, "a", "/A", paths=("/B",)), ev(5.5, 2, "c", "/C", paths=("/D",)),
              ev(6.0, 1, "c", "/C", paths=("/D",)), ev(6.5, 3, "a", "/A", paths=("/B",))]
    [v] = segment_log(events, 10, 10, W)
    assert v.counts.sum() == 4


def test_hundred_events_overlapping_windows():
    times = [i + 0.5 for i in range(100)]
    syscalls = [i % W for i in range(100)]
    got = segment_log(_events(zip(times, syscalls)), 10, 5, W)
    oracle = window_counts(times, syscalls, 10, 5, W)
    assert len(got) == len(oracle) == 20
    # windows lying wholly inside the 100 s span the events sample
    assert sum(1 for v in got if v.end <= times[0] + 100) == 19
    for v, (start, counts) in zip(got, oracle):
        assert v.start == start and list(v.counts) == counts
    # every event lands in two windows, except those only the first window covers
    per_event = [sum(1 for v in got if v.start <= t < v.end) for t in times]
    assert per_event.count(1) == 5 and set(per_event) == {1, 2}


def test_boundary_event_goes_to_later_window():
    got = segment_log(_events([(0.0, 1), (10.0, 2)]), 10, 10, W)
    assert [int(v.counts.sum()) for v in got] == [1, 1]
    assert got[1].counts[2] == 1


def test_infinite_log_window_counts_everything():
    [v] = segment_log(_events([(0.0, 1), (100.0, 1)]), INFINITE, INFINITE, W)
    assert v.counts[1] == 2 and math.isinf(v.end)


@pytest.mark.parametrize("delta, stride", [(0, None), (-1, None), (10, 11), (10, 0)])
def test_bad_window_arguments(delta, stride):
    with pytest.raises(ValueError):
        segment_log(_events([(0.0, 1)]), delta, stride, W)


def test_out_of_range_syscall_names_the_index():
    with pytest.raises(SyscallIndexError, match="99"):
        segment_log(_events([(0.0, 99)]), 10, 10, W)


def test_empty_log():
    assert segment_log([], 10, 10, W) == []


@given(st.lists(st.tuples(st.floats(0, 50, allow_nan=False), st.integers(0, W - 1)),
                min_size=1, max_size=40),
       st.floats(0.5, 20), st.floats(0.1, 1.0))
def test_segments_match_membership_oracle(pairs, delta, frac):
    stride = delta * frac
    times, syscalls = zip(*pairs)
    got = segment_log(_events(pairs), delta, stride, W)
    oracle = window_counts(times, syscalls, delta, stride, W)
    assert [list(v.counts) for v in got] == [c for _, c in oracle]
    if frac == 1.0:
        assert sum(int(v.counts.sum()) for v in got) == len(pairs)


def _two_edge_graph():
    # e2, e5 on A->B and e3, e4 on C->D in the same time span
    events = [ev(2.0, 1, "a", "/A", paths=("/B",)), ev(3.0, 2, "c", "/C", paths=("/D",)),
              ev(4.0, 3, "c", "/C", paths=("/D",)), ev(5.0, 4, "a", "/A", paths=("/B",))]
    g, _ = build_graph(events, "tree")
    return g


def test_edge_vectors_keep_edges_apart():
    vecs = edge_vectors(_two_edge_graph(), INFINITE, W)
    ab, cd = vecs[("a", "/B")], vecs[("c", "/D")]
    assert len(ab) == len(cd) == 1
    assert ab[0].counts.sum() == cd[0].counts.sum() == 2
    assert ab[0].counts[[1, 4]].tolist() == [1, 1] and ab[0].counts[[2, 3]].sum() == 0


def test_unit_vectors_one_per_interaction():
    g = _two_edge_graph()
    for key, vs in edge_vectors(g, UNIT, W).items():
        assert len(vs) == len(g.edges[key].interactions)
        assert all(v.counts.sum() == 1 for v in vs)


def test_single_interaction_edge():
    g, _ = build_graph([ev(1.0, 5, "1", "/x")], "tree")
    for vs in edge_vectors(g, 3.0, W).values():
        assert len(vs) == 1 and vs[0].counts.sum() == 1


@given(st.lists(st.tuples(st.floats(0, 30, allow_nan=False), st.integers(0, W - 1),
                          st.sampled_from("ab"), st.sampled_from(["/f", "/g"])),
                min_size=1, max_size=30),
       st.floats(0.5, 10))
def test_edge_buckets_reproduce_interactions(specs, delta):
    specs = sorted(specs)
    events = [ev(t, s, "1", "/" + exe, paths=(p,)) for t, s, exe, p in specs]
    g, _ = build_graph(events, "tree")
    vecs = edge_vectors(g, delta, W)
    for key, edge in g.edges.items():
        total = sum(v.counts for v in vecs[key])
        direct = np.bincount([s for _, s in edge.interactions], minlength=W)
        assert np.array_equal(total, direct)
        for v in vecs[key]:
            inside = [s for t, s in edge.interactions if v.start <= t < v.end]
            assert v.counts.sum() == len(inside) > 0
    m = infinite_edge_matrix(g, W)
    assert m.sum() == g.interaction_count


def test_csv_is_sparse():
    g = _two_edge_graph()
    text = segments_to_csv(segment_log(_events([(0.0, 3)]), 10, 10, W), edge_vectors(g, INFINITE, W))
    lines = text.strip().splitlines()
    assert lines[0] == "scope,edge,window_start,window_end,counts"
    assert lines[1] == "log,-,0.0,10.0,3:1"
    assert "a->/B,2.0,inf,1:1 4:1" in text
