from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ev
from rigkit.graph import build_graph
from rigkit.labeler import AttackWindow, Label, format_window, label_edges, labels_to_csv, read_window


def _graph():
    # five edges before t=10, three new ones at t=12, reuse of an old edge at t=13
    events = [ev(1.0, 0, "10", "/bin/a", paths=("/f1", "/f2", "/f3")),
              ev(12.0, 0, "20", "/bin/a", uid="1000", paths=("/new",)),
              ev(13.0, 0, "10", "/bin/a", paths=("/f1",))]
    g, _ = build_graph(events, "pseudo")
    return g


def test_counts_before_and_during():
    g = _graph()
    labels, summary = label_edges(g, AttackWindow(10.0, 5.0))
    assert (summary.normal, summary.abnormal) == (5, 3)
    assert labels[("0executable:/bin/a", "/f1")] is Label.NORMAL  # reused during the attack
    assert labels[("1000executable:/bin/a", "/new")] is Label.ABNORMAL


def test_window_ends_are_inclusive():
    g = _graph()
    assert label_edges(g, AttackWindow(12.0, 1.0))[1].abnormal == 3
    assert label_edges(g, AttackWindow(11.0, 1.0))[1].abnormal == 3
    assert label_edges(g, AttackWindow(12.001, 1.0))[1].abnormal == 0


def test_no_window_or_outside_window_is_all_normal(caplog):
    g = _graph()
    assert label_edges(g, None)[1].abnormal == 0
    labels, summary = label_edges(g, AttackWindow(500.0, 5.0))
    assert summary.abnormal == 0 and summary.window_outside_log
    assert "outside" in caplog.text


def test_duration_must_be_positive():
    with pytest.raises(ValueError):
        AttackWindow(1.0, 0.0)


@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=20),
       st.floats(0, 100), st.floats(0.01, 50), st.floats(0, 20), st.floats(0, 20))
def test_widening_never_clears_a_label(times, start, dur, left, right):
    events = [ev(t, 0, str(i), "/x") for i, t in enumerate(sorted(times))]
    g, _ = build_graph(events, "tree")
    narrow, _ = label_edges(g, AttackWindow(start, dur))
    wide, _ = label_edges(g, AttackWindow(start - left, dur + left + right))
    for k, lab in narrow.items():
        if lab is Label.ABNORMAL:
            assert wide[k] is Label.ABNORMAL
    for k, edge in g.edges.items():
        assert (narrow[k] is Label.ABNORMAL) == (start <= edge.created_at <= start + dur)


def test_sidecar_round_trip(tmp_path):
    p = tmp_path / "x.window"
    p.write_text(format_window(AttackWindow(1632851805.333, 42.5)))
    assert read_window(p) == AttackWindow(1632851805.333, 42.5)
    p.write_text("")
    assert read_window(p) is None
    p.write_text("1 2 3")
    with pytest.raises(ValueError):
        read_window(p)


def test_labels_csv():
    labels, _ = label_edges(_graph(), AttackWindow(10.0, 5.0))
    lines = labels_to_csv(labels).splitlines()
    assert lines[0] == "from,to,label" and len(lines) == 9
    assert "1000executable:/bin/a,/new,ABNORMAL" in lines
