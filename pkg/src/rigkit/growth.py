"""Graph size as a function of events folded in.

Counts are sampled every ``stride`` events after dropping a head and a tail
of the log (start-up and shutdown of the recording harness).
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

from .auditlog import AuditEvent
from .graph import Mode, RIGraph

DEFAULT_BASE = 1.02


@dataclass(frozen=True)
class GrowthPoint:
    events: int
    vertices: int
    edges: int
    interactions: int


@dataclass
class GrowthSeries:
    stride: int
    mode: Mode
    points: list[GrowthPoint] = field(default_factory=list)

    @property
    def event_counts(self) -> list[int]:
        return [p.events for p in self.points]


def growth(events: Sequence[AuditEvent], mode: Mode | str = Mode.PSEUDO_PROCESS, stride: int = 200,
           skip_head: int = 200, skip_tail: int = 200) -> GrowthSeries:
    """Fold the kept events and record counts after every ``stride`` of them.

    ``events`` in a point counts kept events folded so far (skipped ones
    included, they simply add nothing). The last point is always recorded.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if skip_head < 0 or skip_tail < 0:
        raise ValueError("skips must be non-negative")
    if len(events) <= skip_head + skip_tail:
        raise ValueError(f"{len(events)} events do not survive skipping {skip_head}+{skip_tail}")
    kept = events[skip_head:len(events) - skip_tail]
    g = RIGraph(Mode.parse(mode))
    series = GrowthSeries(stride, g.mode)
    for i, e in enumerate(kept, 1):
        g.apply_event(e)
        if i % stride == 0 or i == len(kept):
            series.points.append(GrowthPoint(i, len(g.nodes), len(g.edges), g.interaction_count))
    return series


def log_reference(event_counts: Sequence[int], base: float = DEFAULT_BASE) -> list[float]:
    if base <= 1:
        raise ValueError("base must be > 1")
    if any(n < 1 for n in event_counts):
        raise ValueError("event counts must be >= 1")
    lb = math.log(base)
    return [math.log(n) / lb for n in event_counts]


CSV_HEADER = ("events", "vertices", "edges", "interactions", "log_reference")


def series_to_csv(series: GrowthSeries, base: float = DEFAULT_BASE) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    ref = log_reference(series.event_counts, base)
    for p, r in zip(series.points, ref):
        w.writerow([p.events, p.vertices, p.edges, p.interactions, f"{r:.6f}"])
    return buf.getvalue()
