"""Syscall-count vectors over time windows.

Two scopes:

* whole-log segment vectors: every event in ``[t, t + delta)`` adds one to
  ``counts[syscall]``; windows start at the first event and advance by
  ``stride`` (``stride < delta`` overlaps windows);
* per-edge vectors: an edge's interactions bucketed into consecutive
  ``delta`` windows anchored at the edge's creation time.

``INFINITE`` gives one vector per edge; ``UNIT`` gives one unit vector per
interaction, the limit of an arbitrarily small ``delta``.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .auditlog import AuditEvent
from .graph import EdgeKey, RIGraph

INFINITE = math.inf
UNIT = "unit"


class SyscallIndexError(ValueError):
    pass


@dataclass
class SegmentVector:
    start: float
    end: float
    counts: np.ndarray


@dataclass
class EdgeVector:
    edge: EdgeKey
    start: float
    end: float
    counts: np.ndarray


def _check_index(syscall: int, width: int) -> None:
    if syscall < 0 or syscall >= width:
        raise SyscallIndexError(
            f"syscall index {syscall} outside vector width {width} (syscall table mismatch?)"
        )


def segment_log(events: Sequence[AuditEvent], delta: float, stride: float | None = None,
                width: int = 512) -> list[SegmentVector]:
    """Whole-log time-segment vectors (half-open windows)."""
    stride = delta if stride is None else stride
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not 0 < stride <= delta:
        raise ValueError("stride must satisfy 0 < stride <= delta")
    if not events:
        return []
    times = np.array([e.timestamp for e in events], dtype=float)
    sc = np.array([e.syscall for e in events], dtype=np.int64)
    for s in (sc.min(), sc.max()):
        _check_index(int(s), width)
    t0, t_last = float(times.min()), float(times.max())
    if math.isinf(delta):
        counts = np.bincount(sc, minlength=width).astype(np.int64)
        return [SegmentVector(t0, INFINITE, counts)]
    order = np.argsort(times, kind="stable")
    times, sc = times[order], sc[order]
    out = []
    k = 0
    while True:
        start = t0 + k * stride
        if start > t_last:
            break
        end = start + delta
        lo = np.searchsorted(times, start, side="left")
        hi = np.searchsorted(times, end, side="left")
        counts = np.bincount(sc[lo:hi], minlength=width).astype(np.int64)
        out.append(SegmentVector(start, end, counts))
        k += 1
    return out


def edge_vectors(g: RIGraph, delta: float | str = INFINITE,
                 width: int = 512) -> dict[EdgeKey, list[EdgeVector]]:
    """Per-edge count vectors; empty buckets are not emitted."""
    if delta != UNIT:
        d = float(delta)
        if not d > 0:
            raise ValueError("delta must be positive")
    out: dict[EdgeKey, list[EdgeVector]] = {}
    for key, edge in g.edges.items():
        if not edge.interactions:
            out[key] = []
            continue
        ts = np.fromiter((t for t, _ in edge.interactions), dtype=float, count=len(edge.interactions))
        sc = np.fromiter((c for _, c in edge.interactions), dtype=np.int64, count=len(edge.interactions))
        for s in (sc.min(), sc.max()):
            _check_index(int(s), width)
        if delta == UNIT:
            vecs = []
            for t, c in zip(ts.tolist(), sc.tolist()):
                counts = np.zeros(width, dtype=np.int64)
                counts[c] = 1
                vecs.append(EdgeVector(key, t, t, counts))
        elif math.isinf(d):
            vecs = [EdgeVector(key, edge.created_at, INFINITE, np.bincount(sc, minlength=width))]
        else:
            buckets = np.floor((ts - edge.created_at) / d).astype(np.int64)
            vecs = []
            for b in np.unique(buckets).tolist():
                start = edge.created_at + b * d
                counts = np.bincount(sc[buckets == b], minlength=width)
                vecs.append(EdgeVector(key, start, start + d, counts))
        out[key] = vecs
    return out


def infinite_edge_matrix(g: RIGraph, width: int) -> np.ndarray:
    """Rows in edge insertion order; one INFINITE vector per edge."""
    m = np.zeros((len(g.edges), width), dtype=np.int64)
    for i, edge in enumerate(g.edges.values()):
        for _ts, sc in edge.interactions:
            _check_index(sc, width)
            m[i, sc] += 1
    return m


def _sparse(counts: np.ndarray) -> str:
    nz = np.flatnonzero(counts)
    return " ".join(f"{i}:{int(counts[i])}" for i in nz)


def _fmt_time(t: float) -> str:
    return "inf" if math.isinf(t) else repr(float(t))


def segments_to_csv(log_vectors: Sequence[SegmentVector] = (),
                    edge_vecs: dict[EdgeKey, list[EdgeVector]] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scope", "edge", "window_start", "window_end", "counts"])
    for v in log_vectors:
        w.writerow(["log", "-", _fmt_time(v.start), _fmt_time(v.end), _sparse(v.counts)])
    for key, vecs in (edge_vecs or {}).items():
        for v in vecs:
            w.writerow(["edge", f"{key[0]}->{key[1]}", _fmt_time(v.start), _fmt_time(v.end),
                        _sparse(v.counts)])
    return buf.getvalue()
