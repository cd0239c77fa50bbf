"""Graph-level anomaly detection by clustering benign graphs.

Every graph becomes a bag of *shingles*: for each node, walk its outgoing
interactions in time order, spell them out as ``<syscall>;<target type>``
after the node's own type letter, and cut the string into chunks of at most
``max_chunk`` characters. Benign graphs are clustered with k-medoids under
cosine distance; a graph farther from its nearest medoid than that
cluster's radius is abnormal.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from collections import Counter
from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .auditlog import AuditEvent
from .graph import Mode, RIGraph, build_graph
from .labeler import AttackWindow, Label
from .metrics import ConfusionMatrix, Metrics, largest_remainder, mean_metrics, metrics

DEFAULT_K_RANGE = (1, 2, 3, 4, 5)
DEFAULT_CHUNK_RANGE = tuple(range(10, 51, 2))
DEFAULT_SLACK_RANGE = (1.0, 1.1, 1.25, 1.5)
SPLIT_FRACTIONS = (0.75, 0.125, 0.125)
# distances are compared against radii with this much float slack
_EPS = 1e-12


@dataclass
class GraphSketch:
    id: str
    shingles: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        bad = {s: c for s, c in self.shingles.items() if c < 1}
        if bad:
            raise ValueError(f"sketch {self.id}: shingle counts must be >= 1, got {bad}")

    @functools.cached_property
    def norm(self) -> float:
        # sketches are treated as immutable once built
        return math.sqrt(sum(c * c for c in self.shingles.values()))

    def __bool__(self) -> bool:
        return bool(self.shingles)


def node_strings(g: RIGraph) -> dict[str, str]:
    """The traversal string of every node.

    Ties in time are broken by target id, then syscall, so the result does
    not depend on insertion order.
    """
    steps: dict[str, list[tuple[float, str, int]]] = {n: [] for n in g.nodes}
    for edge in g.edges.values():
        for ts, sc in edge.interactions:
            steps[edge.from_id].append((ts, edge.to_id, sc))
    out = {}
    for node_id, node in g.nodes.items():
        parts = [node.node_type.char]
        for _ts, dst, sc in sorted(steps[node_id]):
            parts.append(f"{sc};{g.nodes[dst].node_type.char}")
        out[node_id] = "".join(parts)
    return out


def sketch(g: RIGraph, max_chunk: int, graph_id: str = "") -> GraphSketch:
    return chunk_strings(node_strings(g).values(), max_chunk, graph_id)


def chunk_strings(strings: Iterable[str], max_chunk: int, graph_id: str = "") -> GraphSketch:
    """Shingle counts of already spelled-out node strings."""
    if max_chunk < 1:
        raise ValueError("max_chunk must be >= 1")
    counts: Counter[str] = Counter()
    for s in strings:
        for i in range(0, len(s), max_chunk):
            counts[s[i:i + max_chunk]] += 1
    return GraphSketch(graph_id, dict(counts))


def cosine_distance(a: GraphSketch, b: GraphSketch) -> float:
    if not a and not b:
        return 0.0
    if not a or not b:
        return 1.0
    if a.shingles == b.shingles:
        return 0.0
    small, big = (a, b) if len(a.shingles) <= len(b.shingles) else (b, a)
    dot = sum(c * big.shingles.get(s, 0) for s, c in small.shingles.items())
    d = 1.0 - dot / (a.norm * b.norm)
    # clamp rounding noise so identical sketches give exactly 0
    return min(1.0, max(0.0, d))


def distance_matrix(sketches: Sequence[GraphSketch]) -> np.ndarray:
    n = len(sketches)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = cosine_distance(sketches[i], sketches[j])
    return D


def medoid_cost(D: np.ndarray, medoids: Sequence[int]) -> float:
    return float(D[:, list(medoids)].min(axis=1).sum())


def pam(D: np.ndarray, k: int) -> list[int]:
    """Partitioning around medoids on a precomputed distance matrix.

    BUILD adds, one at a time, the point that lowers total cost the most;
    SWAP then applies the best (medoid, non-medoid) exchange until none
    helps. Index order breaks ties, so the result is deterministic.
    """
    n = D.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    medoids = [int(np.argmin(D.sum(axis=0)))]
    nearest = D[:, medoids[0]].copy()
    while len(medoids) < k:
        gains = np.maximum(nearest[:, None] - D, 0.0).sum(axis=0)
        gains[medoids] = -1.0
        best = int(np.argmax(gains))
        medoids.append(best)
        nearest = np.minimum(nearest, D[:, best])

    cost = medoid_cost(D, medoids)
    while True:
        best_cost, best_swap = cost, None
        for pos in range(k):
            for h in range(n):
                if h in medoids:
                    continue
                trial = medoids[:pos] + [h] + medoids[pos + 1:]
                c = medoid_cost(D, trial)
                if c < best_cost - 1e-15:
                    best_cost, best_swap = c, (pos, h)
        if best_swap is None:
            return sorted(medoids)
        medoids[best_swap[0]] = best_swap[1]
        cost = best_cost


# above this many medoid subsets, fall back from enumeration to PAM
EXACT_SUBSET_LIMIT = 20_000


def kmedoids(D: np.ndarray, k: int, exact_limit: int = EXACT_SUBSET_LIMIT) -> list[int]:
    """Minimum-cost medoids: exhaustive when affordable, PAM otherwise.

    PAM's single swaps can stall in a local optimum (four points and k=2
    already suffice), so small problems, which is every desk-scale fit, are
    solved by enumerating all ``C(n, k)`` subsets. Ties go to the
    lexicographically first subset.
    """
    n = D.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    if math.comb(n, k) > exact_limit:
        return pam(D, k)
    best_cost, best = math.inf, None
    for subset in itertools.combinations(range(n), k):
        c = float(D[:, subset].min(axis=1).sum())
        if c < best_cost - 1e-15:
            best_cost, best = c, list(subset)
    return best


@dataclass
class ClusterModel:
    k: int
    max_chunk: int
    slack: float
    medoids: list[GraphSketch]
    radii: list[float]

    def __post_init__(self) -> None:
        if self.k < 1 or len(self.medoids) != self.k or len(self.radii) != self.k:
            raise ValueError("k, medoids and radii disagree")
        if any(r < 0 for r in self.radii):
            raise ValueError("radii must be non-negative")

    def to_json(self) -> str:
        return json.dumps({
            "k": self.k, "max_chunk": self.max_chunk, "slack": self.slack,
            "medoids": [{"id": m.id, "shingles": m.shingles} for m in self.medoids],
            "radii": self.radii,
        }, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ClusterModel:
        d = json.loads(text)
        medoids = [GraphSketch(m["id"], {s: int(c) for s, c in m["shingles"].items()})
                   for m in d["medoids"]]
        return cls(int(d["k"]), int(d["max_chunk"]), float(d["slack"]), medoids,
                   [float(r) for r in d["radii"]])


@dataclass(frozen=True)
class Prediction:
    label: Label
    nearest_cluster: int
    distance: float


def fit_clusters(sketches: Sequence[GraphSketch], k: int, slack: float, max_chunk: int) -> ClusterModel:
    D = distance_matrix(sketches)
    medoids = kmedoids(D, k)
    owner = np.argmin(D[:, medoids], axis=1)
    radii = []
    for c, m in enumerate(medoids):
        members = D[owner == c, m]
        radii.append(slack * float(members.max()) if members.size else 0.0)
    return ClusterModel(k, max_chunk, slack, [sketches[m] for m in medoids], radii)


def predict(model: ClusterModel, s: GraphSketch) -> Prediction:
    if not s:
        return Prediction(Label.ABNORMAL, -1, 1.0)
    dists = [cosine_distance(s, m) for m in model.medoids]
    c = int(np.argmin(dists))
    bad = dists[c] > model.radii[c] + _EPS
    return Prediction(Label.ABNORMAL if bad else Label.NORMAL, c, dists[c])


@dataclass(frozen=True)
class Candidate:
    max_chunk: int
    k: int
    slack: float
    validation_fp: int


def fit(train: Sequence[RIGraph], validate: Sequence[RIGraph],
        k_range: Iterable[int] = DEFAULT_K_RANGE,
        max_chunk_range: Iterable[int] = DEFAULT_CHUNK_RANGE,
        slack_range: Iterable[float] = DEFAULT_SLACK_RANGE) -> tuple[ClusterModel, list[Candidate]]:
    """Search (max_chunk, k, slack) on benign graphs.

    The winner has the fewest false positives on the benign validation
    graphs; ties go to the smaller max_chunk, then smaller k, then smaller
    slack (the tightest radii that are equally quiet).
    """
    if not train:
        raise ValueError("fit needs at least one training graph")
    ks, slacks = sorted(set(k_range)), sorted(set(slack_range))
    # node strings do not depend on the chunk size; spell them out once
    tr_strings = [list(node_strings(g).values()) for g in train]
    va_strings = [list(node_strings(g).values()) for g in validate]
    tried: list[Candidate] = []
    best: tuple[tuple, ClusterModel] | None = None
    for chunk in sorted(set(max_chunk_range)):
        tr = [chunk_strings(s, chunk, f"train{i}") for i, s in enumerate(tr_strings)]
        va = [chunk_strings(s, chunk, f"validate{i}") for i, s in enumerate(va_strings)]
        D = distance_matrix(tr)
        # validation-to-train distances serve every (k, slack) below
        V = np.array([[cosine_distance(v, t) for t in tr] for v in va]).reshape(len(va), len(tr))
        empty = np.array([not v for v in va], dtype=bool)
        for k in ks:
            if k > len(tr):
                continue
            medoids = kmedoids(D, k)
            owner = np.argmin(D[:, medoids], axis=1)
            spread = [float(D[owner == c, m].max()) for c, m in enumerate(medoids)]
            near = V[:, medoids]
            nearest = np.argmin(near, axis=1) if len(va) else np.zeros(0, dtype=int)
            dist = near[np.arange(len(va)), nearest]
            for slack in slacks:
                radii = [slack * r for r in spread]
                model = ClusterModel(k, chunk, slack, [tr[m] for m in medoids], radii)
                # same rule as predict(), vectorised over the validation set
                flagged = empty | (dist > np.asarray(radii)[nearest] + _EPS)
                fp = int(flagged.sum())
                tried.append(Candidate(chunk, k, slack, fp))
                key = (fp, chunk, k, slack)
                if best is None or key < best[0]:
                    best = (key, model)
    if best is None:
        raise ValueError("no candidate fits: every k exceeds the training set size")
    return best[1], tried


@dataclass
class LogItem:
    """One log, reduced to the graphs the protocol needs."""

    name: str
    benign: RIGraph            # pre-attack events only (the whole log if no attack)
    whole: RIGraph             # every event
    attacked: bool


def log_item(name: str, events: Sequence[AuditEvent], window: AttackWindow | None,
             mode: Mode | str) -> LogItem:
    whole, _ = build_graph(events, mode)
    if window is None:
        return LogItem(name, whole, whole, False)
    benign, _ = build_graph([e for e in events if e.timestamp < window.start], mode)
    return LogItem(name, benign, whole, True)


@dataclass
class FoldSplit:
    train: list[int]
    validate: list[int]
    test: list[int]


def fold_splits(strata: Sequence[Hashable], folds: int, seed: int) -> list[FoldSplit]:
    """Rotating 75/12.5/12.5 splits, stratified by ``strata[i]``.

    Each stratum (say, attack logs and benign logs) is permuted once with
    the seed and cut into train/validate/test by largest remainder; fold f
    rotates every permutation by f * (size // folds) positions, so test
    groups of different folds do not overlap.
    """
    n = len(strata)
    if folds < 1:
        raise ValueError("folds must be >= 1")
    if n < folds:
        raise ValueError(f"{n} logs cannot be split into {folds} folds")
    rng = np.random.default_rng(seed)
    groups: dict[Hashable, list[int]] = {}
    for i, key in enumerate(strata):
        groups.setdefault(key, []).append(i)
    splits = [FoldSplit([], [], []) for _ in range(folds)]
    for key in sorted(groups, key=repr):
        members = groups[key]
        sizes = largest_remainder(len(members), SPLIT_FRACTIONS)
        perm = [members[i] for i in rng.permutation(len(members))]
        shift = len(members) // folds
        for f, split in enumerate(splits):
            r = perm[f * shift:] + perm[:f * shift]
            split.train.extend(r[:sizes[0]])
            split.validate.extend(r[sizes[0]:sizes[0] + sizes[1]])
            split.test.extend(r[sizes[0] + sizes[1]:])
    for split in splits:
        if not (split.train and split.validate and split.test):
            raise ValueError(f"{n} logs leave an empty train/validate/test group")
        split.train.sort(), split.validate.sort(), split.test.sort()
    return splits


@dataclass
class FoldResult:
    fold: int
    model: ClusterModel
    confusion: ConfusionMatrix
    metrics: Metrics


@dataclass
class CrossValResult:
    folds: list[FoldResult]
    mean: Metrics


def crossval(items: Sequence[LogItem], folds: int = 4, seed: int = 0,
             k_range: Iterable[int] = DEFAULT_K_RANGE,
             max_chunk_range: Iterable[int] = DEFAULT_CHUNK_RANGE,
             slack_range: Iterable[float] = DEFAULT_SLACK_RANGE) -> CrossValResult:
    k_range, max_chunk_range, slack_range = list(k_range), list(max_chunk_range), list(slack_range)
    results = []
    # test graphs are whole logs; a log is positive iff it carries an attack
    for f, split in enumerate(fold_splits([it.attacked for it in items], folds, seed)):
        model, _ = fit([items[i].benign for i in split.train],
                       [items[i].benign for i in split.validate],
                       k_range, max_chunk_range, slack_range)
        pred, truth = [], []
        for i in split.test:
            p = predict(model, sketch(items[i].whole, model.max_chunk))
            pred.append(p.label is Label.ABNORMAL)
            truth.append(items[i].attacked)
        cm = ConfusionMatrix.from_predictions(pred, truth)
        results.append(FoldResult(f, model, cm, metrics(cm)))
    return CrossValResult(results, mean_metrics([r.metrics for r in results]))
