"""Command-line entry point: ``rigkit <subcommand> ...``.

Every subcommand reads ``-`` as stdin and writes to stdout when no output
path is given, so stages pipe into each other::

    rigkit synth --attack none | rigkit build - | rigkit label -

Failures print one JSON object on stderr and exit 1; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
from collections.abc import Sequence
from pathlib import Path

from . import __version__
from .auditlog import AuditEvent, dump_ndjson, load_ndjson, parse_text
from .cluster import crossval, log_item
from .gae import SCORE_GRAPHS, GAEConfig, TrainingError, run_protocol
from .graph import RIGraph, build_graph, from_json, write_graph
from .growth import DEFAULT_BASE, growth, series_to_csv
from .labeler import AttackWindow, Label, format_window, label_edges, labels_to_csv, read_window
from .metrics import ConfusionMatrix, metrics, metrics_json, metrics_row, rows_to_csv
from .segmentation import INFINITE, UNIT, edge_vectors, segment_log, segments_to_csv
from .syscalls import SyscallTableError, load_syscall_table
from .synth import Attack, ScenarioSpec, generate

DEFAULT_SEED = 0
log = logging.getLogger("rigkit")


class CLIError(Exception):
    """A data problem worth one line on stderr and exit status 1."""


# ---- i/o helpers ---------------------------------------------------------

def read_input(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    p = Path(path)
    if not p.exists():
        raise CLIError(f"input not found: {path}")
    return p.read_text()


def write_output(path: str | None, text: str) -> None:
    """Write atomically (temp file + rename); ``None`` or ``-`` is stdout."""
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _first_line(text: str) -> str:
    for line in text.splitlines():
        if line.strip():
            return line.strip()
    return ""


def load_events(text: str, table_name: str | None) -> list[AuditEvent]:
    """Audit text or the NDJSON dump written by ``rigkit parse``."""
    if _first_line(text).startswith("{"):
        return load_ndjson(text.splitlines())
    events, stats = parse_text(text, load_syscall_table(table_name))
    if stats.warnings:
        log.warning("%d parse warnings; first: line %d: %s", len(stats.warnings),
                    *stats.warnings[0])
    return events


def load_graph(text: str, mode: str, cwd_node: bool, table_name: str | None) -> RIGraph:
    """A graph JSON document, or anything ``load_events`` accepts."""
    first = _first_line(text)
    if first.startswith("{") and not first.endswith("}"):
        return from_json(text)
    if first.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError:
            doc = None
        if isinstance(doc, dict) and "edges" in doc:
            return from_json(doc)
    g, _ = build_graph(load_events(text, table_name), mode, cwd_node=cwd_node)
    return g


def resolve_window(args: argparse.Namespace) -> AttackWindow | None:
    if getattr(args, "start", None) is not None:
        if args.duration is None:
            raise CLIError("--start needs --duration")
        return AttackWindow(args.start, args.duration)
    if getattr(args, "window", None):
        return read_window(args.window)
    inp = getattr(args, "input", "-")
    if inp != "-":
        sidecar = Path(inp).with_suffix(".window")
        if sidecar.exists():
            return read_window(sidecar)
    return None


def _int_range(text: str) -> list[int]:
    """``1-5``, ``10-50:2`` or a comma list."""
    try:
        if "-" in text:
            span, _, step = text.partition(":")
            lo, hi = span.split("-")
            return list(range(int(lo), int(hi) + 1, int(step or 1)))
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer range {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _hidden(text: str) -> tuple[int, int]:
    try:
        h0, h1 = (int(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("--hidden expects h0,h1") from exc
    return h0, h1


def _delta(text: str) -> float | str:
    if text in ("inf", "infinite"):
        return INFINITE
    if text == "unit":
        return UNIT
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("--delta expects seconds, 'inf' or 'unit'") from exc


# ---- subcommands ---------------------------------------------------------

def cmd_parse(args: argparse.Namespace) -> None:
    text = read_input(args.input)
    events, stats = parse_text(text, load_syscall_table(args.table))
    buf = io.StringIO()
    dump_ndjson(events, buf)
    write_output(args.output, buf.getvalue())
    log.info("parsed %d events from %d lines (%d skipped, %d warnings)",
             stats.events, stats.lines, stats.skipped_events, len(stats.warnings))


def cmd_build(args: argparse.Namespace) -> None:
    g = load_graph(read_input(args.input), args.mode, args.cwd_node, args.table)
    buf = io.StringIO()
    write_graph(g, buf, args.format)
    write_output(args.output, buf.getvalue())
    log.info("%s graph: %d nodes, %d edges", g.mode.value, len(g.nodes), len(g.edges))


def cmd_label(args: argparse.Namespace) -> None:
    g = load_graph(read_input(args.input), args.mode, args.cwd_node, args.table)
    labels, summary = label_edges(g, resolve_window(args))
    write_output(args.output, labels_to_csv(labels))
    print(json.dumps({"normal": summary.normal, "abnormal": summary.abnormal,
                      "window_outside_log": summary.window_outside_log}), file=sys.stderr)


def cmd_export(args: argparse.Namespace) -> None:
    text = read_input(args.input)
    width = load_syscall_table(args.table).width
    if args.format == "log-vectors":
        if args.delta is None or not isinstance(args.delta, float):
            raise CLIError("log-vectors need a numeric --delta")
        events = load_events(text, args.table)
        out = segments_to_csv(segment_log(events, args.delta, args.stride, width))
    elif args.format == "edge-vectors":
        g = load_graph(text, args.mode, args.cwd_node, args.table)
        delta = INFINITE if args.delta is None else args.delta
        out = segments_to_csv((), edge_vectors(g, delta, width))
    else:
        g = load_graph(text, args.mode, args.cwd_node, args.table)
        buf = io.StringIO()
        write_graph(g, buf, args.format)
        out = buf.getvalue()
    write_output(args.output, out)


def cmd_growth(args: argparse.Namespace) -> None:
    events = load_events(read_input(args.input), args.table)
    series = growth(events, args.mode, args.stride, args.skip_head, args.skip_tail)
    write_output(args.output, series_to_csv(series, args.log_base))


def cmd_gae(args: argparse.Namespace) -> None:
    window = resolve_window(args)
    if window is None:
        raise CLIError("gae needs an attack window (--window, --start/--duration or a .window sidecar)")
    g = load_graph(read_input(args.input), args.mode, args.cwd_node, args.table)
    labels, _ = label_edges(g, window)
    cfg = GAEConfig(hidden=args.hidden, lr=args.lr, epochs=args.epochs, seed=args.seed,
                    optimizer=args.optimizer, scale_attributes=not args.raw_attributes,
                    node_attrs_only=args.node_attrs_only, score_graph=args.score_graph)
    threshold = None if args.sweep else args.threshold
    run = run_protocol(g, labels, load_syscall_table(args.table).width, cfg, threshold,
                       args.train_fraction)
    c = run.classification
    row = metrics_row(c.confusion, c.metrics, scenario=args.scenario, mode=g.mode.value,
                      detector="gae-node-only" if args.node_attrs_only else "gae",
                      threshold=c.threshold)
    write_output(args.output, rows_to_csv([row]))
    if args.model:
        write_output(args.model, run.result.model.to_json())
    if args.scores:
        lines = ["from,to,score,label"]
        for key, s, y in zip(run.split.test_keys, run.test_scores, run.split.test_labels):
            lab = Label.ABNORMAL if y else Label.NORMAL
            lines.append(f"{json.dumps(key[0])},{json.dumps(key[1])},{s:.6f},{lab.value}")
        write_output(args.scores, "\n".join(lines) + "\n")


def cmd_cluster(args: argparse.Namespace) -> None:
    items = []
    for path in args.inputs:
        window = read_window(Path(path).with_suffix(".window")) \
            if Path(path).with_suffix(".window").exists() else None
        events = load_events(read_input(path), args.table)
        items.append(log_item(Path(path).stem, events, window, args.mode))
    res = crossval(items, args.folds, args.seed, args.k_range, args.chunk_range, args.slack_range)
    rows = [metrics_row(f.confusion, f.metrics, scenario=args.scenario, mode=args.mode,
                        detector="cluster", fold=f.fold) for f in res.folds]
    total = sum((f.confusion for f in res.folds), ConfusionMatrix())
    rows.append(metrics_row(total, res.mean, scenario=args.scenario, mode=args.mode,
                            detector="cluster", fold="mean"))
    write_output(args.output, rows_to_csv(rows))
    if args.model_dir:
        for f in res.folds:
            write_output(str(Path(args.model_dir) / f"fold{f.fold}.json"), f.model.to_json())


def cmd_eval(args: argparse.Namespace) -> None:
    cm = ConfusionMatrix(*args.confusion)
    write_output(args.output, json.dumps(metrics_json(cm, metrics(cm)), indent=1) + "\n")


def cmd_synth(args: argparse.Namespace) -> None:
    if args.spec:
        spec = ScenarioSpec.from_json(read_input(args.spec))
        if args.seed_given:
            spec.seed = args.seed
    else:
        spec = ScenarioSpec(duration=args.duration, attack=Attack.parse(args.attack),
                            attack_start=args.attack_start, seed=args.seed, table=args.table_name)
    out = generate(spec)
    if args.out_dir:
        out.write(args.out_dir, args.name)
        return
    write_output(args.output, out.text)
    if args.window_out:
        write_output(args.window_out, format_window(out.window))


# ---- argument parsing ----------------------------------------------------

def _common(p: argparse.ArgumentParser, graph: bool = True) -> None:
    p.add_argument("--table", default=None,
                   help="syscall table: built-in name or file (default: $RIGKIT_SYSCALL_TABLE or x86-64)")
    if graph:
        p.add_argument("--mode", choices=["pseudo", "tree"], default="pseudo")
        p.add_argument("--cwd-node", action="store_true", help="add the working directory as a file node")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rigkit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"rigkit {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="audit log -> NDJSON events")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    _common(p, graph=False)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("build", help="log or events -> graph")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--format", choices=["json", "dot", "csv"], default="json")
    _common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("label", help="graph + attack window -> edge labels CSV")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--window", help="sidecar with 'start_seconds duration_seconds'")
    p.add_argument("--start", type=float)
    p.add_argument("--duration", type=float)
    _common(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("export", help="graph formats and count-vector CSVs")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--format", choices=["json", "dot", "csv", "edge-vectors", "log-vectors"],
                   default="json")
    p.add_argument("--delta", type=_delta, help="window length in seconds, 'inf' or 'unit'")
    p.add_argument("--stride", type=float, help="log-vector window stride (default: delta)")
    _common(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("growth", help="vertex/edge/interaction series CSV")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--stride", type=int, default=200)
    p.add_argument("--skip-head", type=int, default=200)
    p.add_argument("--skip-tail", type=int, default=200)
    p.add_argument("--log-base", type=float, default=DEFAULT_BASE)
    _common(p)
    p.set_defaults(func=cmd_growth)

    p = sub.add_parser("gae", help="train the graph autoencoder and classify held-out edges")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="metrics CSV (default stdout)")
    p.add_argument("--window")
    p.add_argument("--start", type=float)
    p.add_argument("--duration", type=float)
    t = p.add_mutually_exclusive_group()
    t.add_argument("--threshold", type=float, default=None)
    t.add_argument("--sweep", action="store_true", help="pick the max-F1 threshold on a 0.01 grid")
    p.add_argument("--epochs", type=int, default=10_000)
    p.add_argument("--hidden", type=_hidden, default=(32, 16))
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--optimizer", choices=["gd", "adam"], default="gd")
    p.add_argument("--node-attrs-only", action="store_true")
    p.add_argument("--raw-attributes", action="store_true", help="skip log1p/max scaling")
    p.add_argument("--score-graph", choices=SCORE_GRAPHS, default="observed")
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--scenario", default="")
    p.add_argument("--model", help="write the trained checkpoint here")
    p.add_argument("--scores", help="write held-out edge scores CSV here")
    _common(p)
    p.set_defaults(func=cmd_gae)

    p = sub.add_parser("cluster", help="k-fold cross-validation of the cluster detector")
    p.add_argument("inputs", nargs="+", help="logs; a sibling .window file marks an attack log")
    p.add_argument("-o", "--output")
    p.add_argument("--k-range", type=_int_range, default=[1, 2, 3, 4, 5])
    p.add_argument("--chunk-range", type=_int_range, default=list(range(10, 51, 2)))
    p.add_argument("--slack-range", type=_float_list, default=[1.0, 1.1, 1.25, 1.5])
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--scenario", default="")
    p.add_argument("--model-dir", help="write one model JSON per fold here")
    _common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("eval", help="metrics from a confusion matrix")
    p.add_argument("--confusion", type=lambda s: [int(x) for x in s.split(",")], required=True,
                   metavar="TP,FP,FN,TN")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic audit log")
    p.add_argument("--attack", default="none", choices=[a.value for a in Attack])
    p.add_argument("--duration", type=float, default=900.0)
    p.add_argument("--attack-start", type=float, default=None, help="seconds after log start")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--table", dest="table_name", default="x86-64")
    p.add_argument("--spec", help="ScenarioSpec JSON (overrides the flags above except --seed)")
    p.add_argument("-o", "--output", help="log text (default stdout)")
    p.add_argument("--window-out", help="where to write the window sidecar")
    p.add_argument("--out-dir", help="write <name>.log and <name>.window here instead")
    p.add_argument("--name", default="synth")
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "synth":
        args.seed_given = args.seed is not None
        if args.seed is None:
            args.seed = DEFAULT_SEED
    if args.command == "eval" and len(args.confusion) != 4:
        ap.error("--confusion expects four integers TP,FP,FN,TN")
    try:
        args.func(args)
    except BrokenPipeError:
        # downstream closed early (e.g. `| head`); not an error
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 0
    except (CLIError, ValueError, KeyError, OSError, SyscallTableError, TrainingError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc).strip("'\"")}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
