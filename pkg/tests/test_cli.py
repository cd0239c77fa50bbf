from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from conftest import ESCAPE, ESCAPE_RAW
from rigkit.auditlog import parse_text
from rigkit.cli import main
from rigkit.graph import Mode, NodeType, build_graph, census, from_json, to_json


def _run(capsys, *argv: str) -> tuple[int, str, str]:
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def escape_file(tmp_path):
    p = tmp_path / "escape.log"
    p.write_text(ESCAPE)
    return p


def test_build_escape_pseudo(capsys, escape_file):
    code, out, _ = _run(capsys, "build", str(escape_file))
    assert code == 0
    g = from_json(out)
    assert g.mode is Mode.PSEUDO_PROCESS
    nodes, edges = census(g)
    assert nodes["0"] is NodeType.USER
    assert nodes["0executable:/bin/busybox"] is NodeType.PROCESS
    assert ("0", "0executable:/bin/busybox") in edges
    assert out == to_json(build_graph(parse_text(ESCAPE)[0], "pseudo")[0])


def test_both_layouts_build_the_same_graph(capsys, tmp_path):
    (tmp_path / "raw.log").write_text(ESCAPE_RAW)
    (tmp_path / "short.log").write_text(ESCAPE)
    _, raw, _ = _run(capsys, "build", "--mode", "tree", str(tmp_path / "raw.log"))
    _, short, _ = _run(capsys, "build", "--mode", "tree", str(tmp_path / "short.log"))
    assert raw == short


def test_parse_then_build_matches_direct_build(capsys, tmp_path):
    log = tmp_path / "a.log"
    log.write_text(ESCAPE_RAW)
    assert _run(capsys, "parse", str(log), "-o", str(tmp_path / "a.ndjson"))[0] == 0
    _, via, _ = _run(capsys, "build", str(tmp_path / "a.ndjson"))
    _, direct, _ = _run(capsys, "build", str(log))
    assert via == direct


def test_benign_pipeline_labels_nothing_abnormal():
    cmd = [sys.executable, "-m", "rigkit.cli"]
    synth = subprocess.run(cmd + ["synth", "--duration", "60"], capture_output=True, check=True)
    build = subprocess.run(cmd + ["build", "-"], input=synth.stdout, capture_output=True, check=True)
    label = subprocess.run(cmd + ["label", "-"], input=build.stdout, capture_output=True, check=True)
    rows = _rows(label.stdout.decode())
    assert rows and {r["label"] for r in rows} == {"NORMAL"}
    assert json.loads(label.stderr)["abnormal"] == 0


@pytest.fixture(scope="module")
def privesc_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("privesc")
    assert main(["synth", "--attack", "privesc", "--duration", "300", "--seed", "3",
                 "--out-dir", str(d), "--name", "p"]) == 0
    return d


def test_label_with_sidecar(capsys, privesc_dir):
    code, out, err = _run(capsys, "label", str(privesc_dir / "p.log"))
    assert code == 0
    summary = json.loads(err)
    assert summary["abnormal"] > 0
    assert sum(r["label"] == "ABNORMAL" for r in _rows(out)) == summary["abnormal"]


def test_gae_sweep_row(capsys, privesc_dir, tmp_path):
    args = ["gae", str(privesc_dir / "p.log"), "--sweep", "--epochs", "50", "--scenario", "privesc"]
    code, out, _ = _run(capsys, *args, "--model", str(tmp_path / "m.json"),
                        "--scores", str(tmp_path / "s.csv"))
    assert code == 0
    (row,) = _rows(out)
    assert 0.0 <= float(row["threshold"]) <= 1.0
    assert 0.0 <= float(row["f1"]) <= 1.0
    assert (row["scenario"], row["mode"], row["detector"]) == ("privesc", "pseudo", "gae")
    scores = _rows((tmp_path / "s.csv").read_text())
    assert len(scores) == sum(int(row[k]) for k in ("TP", "FP", "FN", "TN"))
    assert json.loads((tmp_path / "m.json").read_text())
    # same seed, same bytes
    assert _run(capsys, *args)[1] == out


def test_gae_without_window_fails(capsys, escape_file):
    code, _, err = _run(capsys, "gae", str(escape_file), "--epochs", "5")
    assert code == 1 and "window" in json.loads(err)["message"]


def test_eval(capsys):
    code, out, _ = _run(capsys, "eval", "--confusion", "72,20,8,612")
    doc = json.loads(out)
    assert code == 0
    assert doc["confusion"] == {"tp": 72, "fp": 20, "fn": 8, "tn": 612}
    assert doc["metrics"]["f1"] == pytest.approx(0.837, abs=0.001)


def test_eval_wrong_arity_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--confusion", "1,2,3"])
    assert exc.value.code == 2


def test_missing_input_exits_one_with_json(capsys, tmp_path):
    code, out, err = _run(capsys, "build", str(tmp_path / "nope.log"))
    assert code == 1 and out == ""
    doc = json.loads(err)
    assert doc["error"] == "CLIError" and "nope.log" in doc["message"]


def test_unknown_flag_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["build", "--bogus", "x"])
    assert exc.value.code == 2


def test_bad_table_env(capsys, escape_file, monkeypatch):
    monkeypatch.setenv("RIGKIT_SYSCALL_TABLE", "no-such-arch")
    code, _, err = _run(capsys, "build", str(escape_file))
    assert code == 1 and json.loads(err)["error"] == "SyscallTableError"


def test_outputs_are_byte_identical_across_runs(capsys, privesc_dir, tmp_path):
    for i in range(2):
        assert _run(capsys, "build", str(privesc_dir / "p.log"), "--mode", "tree",
                    "-o", str(tmp_path / f"g{i}.json"))[0] == 0
    assert (tmp_path / "g0.json").read_bytes() == (tmp_path / "g1.json").read_bytes()
    assert sorted(p.name for p in tmp_path.iterdir()) == ["g0.json", "g1.json"]


@pytest.mark.parametrize("fmt, head", [
    ("dot", "digraph"),
    ("csv", "from,to,from_type,to_type,created_at,interactions"),
])
def test_export_graph_formats(capsys, escape_file, fmt, head):
    code, out, _ = _run(capsys, "export", str(escape_file), "--format", fmt)
    assert code == 0 and out.startswith(head)


def test_export_vectors(capsys, privesc_dir):
    log = str(privesc_dir / "p.log")
    code, out, _ = _run(capsys, "export", log, "--format", "log-vectors", "--delta", "60")
    assert code == 0
    rows = out.strip().splitlines()
    assert len(rows) == 1 + 5
    code, out, _ = _run(capsys, "export", log, "--format", "edge-vectors", "--delta", "inf")
    _, graph, _ = _run(capsys, "build", log)
    assert code == 0
    assert len(out.strip().splitlines()) == 1 + len(from_json(graph).edges)
    code, _, err = _run(capsys, "export", log, "--format", "log-vectors")
    assert code == 1 and "delta" in json.loads(err)["message"]


def test_growth_command(capsys, privesc_dir):
    code, out, _ = _run(capsys, "growth", str(privesc_dir / "p.log"), "--stride", "500")
    rows = _rows(out)
    assert code == 0 and len(rows) > 2
    assert [int(r["events"]) for r in rows][:2] == [500, 1000]


def test_cluster_command(capsys, tmp_path):
    logs = []
    for i in range(6):
        assert main(["synth", "--duration", "60", "--seed", str(40 + i), "--out-dir", str(tmp_path),
                     "--name", f"b{i}"]) == 0
        assert main(["synth", "--attack", "dos", "--duration", "60", "--seed", str(50 + i),
                     "--out-dir", str(tmp_path), "--name", f"a{i}"]) == 0
        logs += [str(tmp_path / f"b{i}.log"), str(tmp_path / f"a{i}.log")]
    capsys.readouterr()
    code, out, _ = _run(capsys, "cluster", *logs, "--folds", "4", "--k-range", "1-2",
                        "--chunk-range", "10,20", "--slack-range", "1.0", "--scenario", "dos",
                        "--model-dir", str(tmp_path / "models"))
    rows = _rows(out)
    assert code == 0
    assert [r["fold"] for r in rows] == ["0", "1", "2", "3", "mean"]
    # one attack and one benign test log per fold
    for r in rows[:4]:
        assert int(r["TP"]) + int(r["FN"]) == 1 and int(r["FP"]) + int(r["TN"]) == 1
    assert sorted(p.name for p in (tmp_path / "models").iterdir()) == [f"fold{i}.json" for i in range(4)]


def test_cluster_needs_enough_logs(capsys, privesc_dir):
    code, _, err = _run(capsys, "cluster", str(privesc_dir / "p.log"), "--folds", "1")
    assert code == 1 and json.loads(err)["error"] == "ValueError"


def test_synth_window_out(capsys, tmp_path):
    code, out, _ = _run(capsys, "synth", "--attack", "dos", "--duration", "60", "--attack-start",
                        "20", "--window-out", str(tmp_path / "w"))
    assert code == 0 and out.startswith("type=")
    start, dur = map(float, (tmp_path / "w").read_text().split())
    assert start == pytest.approx(1632851020.0) and dur > 0
