"""Edge labels from a known attack window.

An edge is ABNORMAL iff it was *created* inside the window (both ends
inclusive). Edges created earlier stay NORMAL even when the attack reuses
them, so NORMAL labels are trustworthy while ABNORMAL ones may include
benign activity that happened to start during the attack.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
from dataclasses import dataclass
from pathlib import Path

from .graph import EdgeKey, RIGraph

log = logging.getLogger(__name__)


class Label(enum.Enum):
    NORMAL = "NORMAL"
    ABNORMAL = "ABNORMAL"


@dataclass(frozen=True)
class AttackWindow:
    start: float
    duration: float

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise ValueError(f"attack window duration must be > 0, got {self.duration}")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def contains(self, t: float) -> bool:
        return self.start <= t <= self.end


@dataclass
class LabelSummary:
    normal: int
    abnormal: int
    window_outside_log: bool = False


def label_edges(g: RIGraph, window: AttackWindow | None) -> tuple[dict[EdgeKey, Label], LabelSummary]:
    labels: dict[EdgeKey, Label] = {}
    outside = False
    if window is not None and g.edges:
        first = min(e.created_at for e in g.edges.values())
        last = max(ts for e in g.edges.values() for ts, _ in e.interactions)
        if window.end < first or window.start > last:
            outside = True
            log.warning("attack window [%s, %s] lies outside the log span [%s, %s]",
                        window.start, window.end, first, last)
    for key, edge in g.edges.items():
        bad = window is not None and window.contains(edge.created_at)
        labels[key] = Label.ABNORMAL if bad else Label.NORMAL
    n_bad = sum(1 for v in labels.values() if v is Label.ABNORMAL)
    return labels, LabelSummary(len(labels) - n_bad, n_bad, outside)


def read_window(path: str | Path) -> AttackWindow | None:
    """Read a ``start_seconds duration_seconds`` sidecar; empty file means no attack."""
    text = Path(path).read_text().strip()
    if not text:
        return None
    parts = text.split()
    if len(parts) != 2:
        raise ValueError(f"{path}: expected 'start_seconds duration_seconds'")
    return AttackWindow(float(parts[0]), float(parts[1]))


def format_window(window: AttackWindow | None) -> str:
    if window is None:
        return ""
    return f"{window.start:.3f} {window.duration:.3f}\n"


def labels_to_csv(labels: dict[EdgeKey, Label]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["from", "to", "label"])
    for (src, dst), lab in labels.items():
        w.writerow([src, dst, lab.value])
    return buf.getvalue()
