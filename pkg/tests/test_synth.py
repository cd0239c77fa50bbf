from __future__ import annotations

import pytest

from conftest import synth_events, synth_log
from rigkit.auditlog import parse_text
from rigkit.graph import build_graph
from rigkit.growth import growth
from rigkit.labeler import label_edges, read_window
from rigkit.synth import Attack, Profile, ScenarioSpec, default_profiles, generate, names_for, scenario_logs


def test_benign_log_has_no_abnormal_edges():
    s = synth_log(0, "none", 300.0)
    assert s.window is None and s.attack_events == 0
    g, _ = build_graph(synth_events(0, "none", 300.0), "pseudo")
    assert label_edges(g, s.window)[1].abnormal == 0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dos_is_louder_than_privesc(seed):
    dos, priv = synth_log(seed, "dos", 300.0), synth_log(seed, "privesc", 300.0)
    assert dos.syscall_events > priv.syscall_events
    assert dos.attack_events > priv.attack_events


@pytest.mark.parametrize("attack", ["none", "dos", "privesc"])
def test_parse_recovers_every_emitted_event(attack):
    s = synth_log(7, attack, 300.0)
    events, stats = parse_text(s.text)
    assert len(events) == s.syscall_events
    assert stats.skipped_events == s.other_events
    assert stats.warnings == []


@pytest.mark.parametrize("attack", ["dos", "privesc"])
def test_window_covers_exactly_the_attack(attack):
    s = synth_log(8, attack, 300.0)
    g, journal = build_graph(synth_events(8, attack, 300.0), "pseudo")
    labels, summary = label_edges(g, s.window)
    assert summary.abnormal > 0
    # the first attack event sits on the window start and creates edges there
    assert any(e.created_at == s.window.start for e in g.edges.values())
    assert max(ts for e in g.edges.values() for ts, _ in e.interactions) >= s.window.end


def test_privesc_touches_a_new_permissions_file():
    s = synth_log(9, "privesc", 300.0)
    g, _ = build_graph(synth_events(9, "privesc", 300.0), "pseudo")
    node = g.nodes["/mnt/host/etc/sudoers"]
    assert s.window.contains(node.created_at)


def test_generation_is_deterministic():
    a = generate(ScenarioSpec(attack="dos", seed=11, duration=120.0))
    b = generate(ScenarioSpec(attack="dos", seed=11, duration=120.0))
    c = generate(ScenarioSpec(attack="dos", seed=12, duration=120.0))
    assert a.text == b.text and a.window == b.window
    assert a.text != c.text


def test_fixed_attack_start():
    s = generate(ScenarioSpec(attack="privesc", seed=1, duration=120.0, attack_start=30.0))
    assert s.window.start == pytest.approx(1632851000.0 + 30.0)


def test_short_lived_profile_grows_tree_but_not_pseudo():
    prof = Profile("probe", "0", "/usr/bin/probe", ["/proc/stat", "/proc/loadavg"], rate=4.0,
                   short_lived=True, argv=["probe"])
    s = generate(ScenarioSpec(duration=300.0, profiles=[prof], seed=2, noise_rate=0.0))
    events, _ = parse_text(s.text)
    tree = growth(events, "tree", stride=100)
    pseudo = growth(events, "pseudo", stride=100)
    assert len({p.vertices for p in pseudo.points}) == 1
    gained = [b.vertices - a.vertices for a, b in zip(tree.points, tree.points[1:])]
    assert min(gained) > 0
    assert tree.points[-1].vertices >= 5 * pseudo.points[-1].vertices


def test_spec_json_round_trip():
    spec = ScenarioSpec(attack="dos", seed=3, duration=50.0, attack_start=10.0)
    back = ScenarioSpec.from_json(spec.to_json())
    assert back == spec
    assert generate(back).text == generate(spec).text


@pytest.mark.parametrize("kwargs", [
    {"duration": 0},
    {"duration": 10.0, "attack_start": 10.0},
    {"attack_start": -1.0},
    {"attack": "ddos"},
    {"profiles": [Profile("x", "0", "/x", ["/f"], rate=0.0)]},
])
def test_bad_specs(kwargs):
    with pytest.raises(ValueError):
        ScenarioSpec(**kwargs)


def test_write_pair(tmp_path):
    s = generate(ScenarioSpec(attack="privesc", seed=0, duration=60.0))
    log_path, win_path = s.write(tmp_path / "out", "p0")
    assert log_path.read_text() == s.text
    assert read_window(win_path) == s.window
    _, none_win = generate(ScenarioSpec(seed=0, duration=30.0)).write(tmp_path, "n0")
    assert read_window(none_win) is None


def test_batch_helpers():
    logs = scenario_logs("none", 2, seed=5, duration=30.0)
    assert logs[0].text == generate(ScenarioSpec(seed=5, duration=30.0)).text
    assert names_for(Attack.DOS_LIKE, 2) == ["dos_000", "dos_001"]
    assert Attack.parse("PRIVESC_LIKE") is Attack.PRIVESC_LIKE


def test_default_profiles_are_well_formed():
    profs = default_profiles()
    assert len({p.name for p in profs}) == len(profs)
    assert all(p.rate > 0 and p.files for p in profs)
    assert any(p.short_lived for p in profs)
