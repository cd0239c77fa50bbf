"""Binary classification metrics and seeded partitions.

ABNORMAL is the positive class throughout.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from typing import TypeVar

import numpy as np

T = TypeVar("T")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_predictions(cls, predicted: Sequence[bool], actual: Sequence[bool]) -> ConfusionMatrix:
        p = np.asarray(predicted, dtype=bool)
        a = np.asarray(actual, dtype=bool)
        return cls(
            tp=int(np.sum(p & a)),
            fp=int(np.sum(p & ~a)),
            fn=int(np.sum(~p & a)),
            tn=int(np.sum(~p & ~a)),
        )

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    # names of metrics whose denominator was zero (reported as 0.0)
    undefined: tuple[str, ...] = field(default=())


def metrics(cm: ConfusionMatrix) -> Metrics:
    undefined = []

    def ratio(num: int | float, den: int | float, name: str) -> float:
        if den == 0:
            undefined.append(name)
            return 0.0
        return num / den

    accuracy = ratio(cm.tp + cm.tn, cm.total, "accuracy")
    precision = ratio(cm.tp, cm.tp + cm.fp, "precision")
    recall = ratio(cm.tp, cm.tp + cm.fn, "recall")
    f1 = ratio(2 * precision * recall, precision + recall, "f1")
    return Metrics(accuracy, precision, recall, f1, tuple(undefined))


def mean_metrics(ms: Sequence[Metrics]) -> Metrics:
    if not ms:
        raise ValueError("no metrics to average")
    return Metrics(
        accuracy=float(np.mean([m.accuracy for m in ms])),
        precision=float(np.mean([m.precision for m in ms])),
        recall=float(np.mean([m.recall for m in ms])),
        f1=float(np.mean([m.f1 for m in ms])),
        undefined=tuple(sorted({u for m in ms for u in m.undefined})),
    )


def largest_remainder(n: int, fractions: Sequence[float]) -> list[int]:
    """Integer group sizes summing to ``n``, ties going to earlier groups."""
    quotas = [n * f for f in fractions]
    sizes = [math.floor(q) for q in quotas]
    short = n - sum(sizes)
    order = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:short]:
        sizes[i] += 1
    return sizes


def seeded_partition(items: Sequence[T], fractions: Sequence[float], seed: int) -> list[list[T]]:
    if not items:
        raise ValueError("cannot partition an empty collection")
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be non-negative and sum to 1, got {fractions}")
    sizes = largest_remainder(len(items), fractions)
    perm = np.random.default_rng(seed).permutation(len(items))
    groups, pos = [], 0
    for size in sizes:
        groups.append([items[i] for i in perm[pos:pos + size]])
        pos += size
    return groups


CSV_FIELDS = ("scenario", "mode", "detector", "fold", "threshold", "TP", "FP", "FN", "TN",
              "accuracy", "precision", "recall", "f1")


def metrics_row(cm: ConfusionMatrix, m: Metrics, *, scenario: str = "", mode: str = "",
                detector: str = "", fold: int | str = "", threshold: float | str = "") -> dict:
    return {
        "scenario": scenario, "mode": mode, "detector": detector, "fold": fold,
        "threshold": threshold, "TP": cm.tp, "FP": cm.fp, "FN": cm.fn, "TN": cm.tn,
        "accuracy": round(m.accuracy, 6), "precision": round(m.precision, 6),
        "recall": round(m.recall, 6), "f1": round(m.f1, 6),
    }


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def metrics_json(cm: ConfusionMatrix, m: Metrics) -> dict:
    return {"confusion": asdict(cm), "metrics": {**asdict(m), "undefined": list(m.undefined)}}
