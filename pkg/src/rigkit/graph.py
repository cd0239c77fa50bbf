"""Resource-interaction graphs built from audit events.

Nodes are resources (users, processes, executables, files, sockets); a
directed edge records every (timestamp, syscall) interaction between two
resources. Nodes and edges are created on first use and never removed.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import TextIO

from .auditlog import AuditEvent

EXE_PREFIX = "executable:"

EdgeKey = tuple[str, str]


class NodeType(enum.Enum):
    PROCESS = "PROCESS"
    EXECUTABLE = "EXECUTABLE"
    USER = "USER"
    FILE = "FILE"
    SOCKET = "SOCKET"

    @property
    def index(self) -> int:
        return _TYPE_ORDER.index(self)

    @property
    def char(self) -> str:
        return _TYPE_CHAR[self]


_TYPE_ORDER = list(NodeType)
_TYPE_CHAR = {
    NodeType.USER: "U",
    NodeType.PROCESS: "P",
    NodeType.EXECUTABLE: "E",
    NodeType.FILE: "F",
    NodeType.SOCKET: "S",
}


class Mode(enum.Enum):
    PROCESS_TREE = "tree"
    PSEUDO_PROCESS = "pseudo"

    @classmethod
    def parse(cls, value: str | Mode) -> Mode:
        if isinstance(value, Mode):
            return value
        for m in cls:
            if value in (m.value, m.name):
                return m
        raise ValueError(f"unknown graph mode {value!r}; use 'tree' or 'pseudo'")


@dataclass
class RIGNode:
    id: str
    node_type: NodeType
    created_at: float


@dataclass
class RIGEdge:
    from_id: str
    to_id: str
    created_at: float
    interactions: list[tuple[float, int]] = field(default_factory=list)

    @property
    def key(self) -> EdgeKey:
        return (self.from_id, self.to_id)


@dataclass
class BuildStats:
    events: int = 0
    skipped_events: int = 0
    type_conflicts: int = 0


@dataclass
class RIGraph:
    mode: Mode
    nodes: dict[str, RIGNode] = field(default_factory=dict)
    edges: dict[EdgeKey, RIGEdge] = field(default_factory=dict)
    stats: BuildStats = field(default_factory=BuildStats)
    cwd_node: bool = False

    @property
    def interaction_count(self) -> int:
        return sum(len(e.interactions) for e in self.edges.values())

    def out_edges(self) -> dict[str, list[RIGEdge]]:
        out: dict[str, list[RIGEdge]] = {n: [] for n in self.nodes}
        for edge in self.edges.values():
            out[edge.from_id].append(edge)
        return out

    def add_node(self, node_id: str, node_type: NodeType, ts: float) -> None:
        node = self.nodes.get(node_id)
        if node is None:
            self.nodes[node_id] = RIGNode(node_id, node_type, ts)
        elif node.node_type is not node_type:
            self.stats.type_conflicts += 1

    def add_edge(self, src: str, dst: str, ts: float, syscall: int) -> bool:
        """Append an interaction; return True when the edge is new."""
        edge = self.edges.get((src, dst))
        if edge is None:
            self.edges[(src, dst)] = RIGEdge(src, dst, ts, [(ts, syscall)])
            return True
        edge.interactions.append((ts, syscall))
        return False

    def apply_event(self, e: AuditEvent) -> list[EdgeKey] | None:
        """Fold one event into the graph.

        Returns the keys of edges this event created, or None when the event
        was skipped for lacking pid, uid or exe. Each edge is touched at most once
        per event even if the event names a resource twice (e.g. a script in
        both PATH and EXECVE records).
        """
        if not e.pid or not e.uid or not e.exe:
            self.stats.skipped_events += 1
            return None
        self.stats.events += 1
        uid = e.uid
        ts, sc = e.timestamp, e.syscall
        exe = EXE_PREFIX + e.exe
        pid = e.pid if self.mode is Mode.PROCESS_TREE else uid + exe

        add = self.add_node
        add(pid, NodeType.PROCESS, ts)
        add(exe, NodeType.EXECUTABLE, ts)
        add(uid, NodeType.USER, ts)
        targets: dict[EdgeKey, None] = {(uid, pid): None, (pid, exe): None}
        if self.mode is Mode.PROCESS_TREE and e.ppid:
            add(e.ppid, NodeType.PROCESS, ts)
            targets[(e.ppid, pid)] = None
        if e.sockaddr is not None:
            addr = e.sockaddr[1]
            add(addr, NodeType.SOCKET, ts)
            targets[(pid, addr)] = None
        if self.cwd_node and e.cwd:
            add(e.cwd, NodeType.FILE, ts)
            targets[(pid, e.cwd)] = None
        for name, _inode in e.paths:
            if name:
                add(name, NodeType.FILE, ts)
                targets[(pid, name)] = None
        for arg in e.execve_args:
            if arg.startswith("/"):
                add(arg, NodeType.FILE, ts)
                targets[(pid, arg)] = None

        # insertion-ordered dict: each edge touched once per event
        created: list[EdgeKey] = []
        edges = self.edges
        for key in targets:
            edge = edges.get(key)
            if edge is None:
                edges[key] = RIGEdge(key[0], key[1], ts, [(ts, sc)])
                created.append(key)
            else:
                edge.interactions.append((ts, sc))
        return created


def apply_event(g: RIGraph, e: AuditEvent, build_tree: bool) -> list[EdgeKey]:
    want = Mode.PROCESS_TREE if build_tree else Mode.PSEUDO_PROCESS
    if g.mode is not want:
        raise ValueError(f"graph mode {g.mode.value} does not match build_tree={build_tree}")
    return g.apply_event(e) or []


def build_graph(events: Iterable[AuditEvent], mode: Mode | str = Mode.PSEUDO_PROCESS,
                cwd_node: bool = False) -> tuple[RIGraph, dict[int, list[EdgeKey]]]:
    """Fold events left to right; the journal maps event index to created edges."""
    g = RIGraph(Mode.parse(mode), cwd_node=cwd_node)
    journal: dict[int, list[EdgeKey]] = {}
    for i, e in enumerate(events):
        created = g.apply_event(e)
        if created:
            journal[i] = created
    return g, journal


@dataclass
class InvariantReport:
    acyclic: bool
    max_path_len: int
    type_conflicts: int


def check_invariants(g: RIGraph) -> InvariantReport:
    preds: dict[str, set[str]] = {n: set() for n in g.nodes}
    for src, dst in g.edges:
        preds.setdefault(dst, set()).add(src)
        preds.setdefault(src, set())
    try:
        order = list(TopologicalSorter(preds).static_order())
    except CycleError:
        return InvariantReport(False, -1, g.stats.type_conflicts)
    longest = dict.fromkeys(order, 0)
    for node in order:
        for p in preds[node]:
            longest[node] = max(longest[node], longest[p] + 1)
    return InvariantReport(True, max(longest.values(), default=0), g.stats.type_conflicts)


# -- export / import -------------------------------------------------------

_DOT_SHAPE = {
    NodeType.USER: "house",
    NodeType.PROCESS: "box",
    NodeType.EXECUTABLE: "diamond",
    NodeType.FILE: "ellipse",
    NodeType.SOCKET: "octagon",
}


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: RIGraph) -> str:
    lines = ["digraph rig {", f"  // mode={g.mode.value}"]
    for node in g.nodes.values():
        lines.append(f"  {_dot_id(node.id)} [shape={_DOT_SHAPE[node.node_type]}];")
    for edge in g.edges.values():
        lines.append(
            f"  {_dot_id(edge.from_id)} -> {_dot_id(edge.to_id)} [label=\"n={len(edge.interactions)}\"];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json_dict(g: RIGraph) -> dict:
    return {
        "mode": g.mode.value,
        "nodes": [
            {"id": n.id, "type": n.node_type.value, "created_at": n.created_at}
            for n in g.nodes.values()
        ],
        "edges": [
            {
                "from": e.from_id,
                "to": e.to_id,
                "created_at": e.created_at,
                "interactions": [[ts, sc] for ts, sc in e.interactions],
            }
            for e in g.edges.values()
        ],
    }


def to_json(g: RIGraph) -> str:
    return json.dumps(to_json_dict(g), indent=1) + "\n"


def from_json(text: str | dict) -> RIGraph:
    doc = json.loads(text) if isinstance(text, str) else text
    g = RIGraph(Mode.parse(doc["mode"]))
    for n in doc["nodes"]:
        g.nodes[n["id"]] = RIGNode(n["id"], NodeType(n["type"]), n["created_at"])
    for e in doc["edges"]:
        g.edges[(e["from"], e["to"])] = RIGEdge(
            e["from"], e["to"], e["created_at"], [(ts, sc) for ts, sc in e["interactions"]]
        )
    return g


def to_csv(g: RIGraph) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["from", "to", "from_type", "to_type", "created_at", "interactions"])
    for e in g.edges.values():
        w.writerow([e.from_id, e.to_id, g.nodes[e.from_id].node_type.value,
                    g.nodes[e.to_id].node_type.value, repr(e.created_at), len(e.interactions)])
    return buf.getvalue()


def write_graph(g: RIGraph, out: TextIO, fmt: str = "json") -> None:
    writers = {"json": to_json, "dot": to_dot, "csv": to_csv}
    if fmt not in writers:
        raise ValueError(f"unknown graph format {fmt!r}")
    out.write(writers[fmt](g))


def census(g: RIGraph) -> tuple[dict[str, NodeType], set[EdgeKey]]:
    """Node-type map and edge-key set, handy for comparisons."""
    return {n.id: n.node_type for n in g.nodes.values()}, set(g.edges)


def node_order(g: RIGraph) -> Sequence[str]:
    return list(g.nodes)
