"""Graph-autoencoder link scoring over a resource-interaction graph.

The directed graph is first turned into an undirected *link prediction
graph*: each node gets a one-hot type vector concatenated with the sum of
the (infinite-window) syscall vectors of its incident edges. Every edge
vector therefore lands in both endpoints.

The encoder is a two-layer GCN, ``Z = A relu(A X W0) W1`` with ``A`` the
symmetrically normalised adjacency (self loops added) of the training
edges. Links are scored with ``sigmoid(z_u . z_v)``; low scores mark links
the model did not expect, which we call abnormal.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import EdgeKey, NodeType, RIGraph
from .labeler import Label
from .metrics import ConfusionMatrix, Metrics, metrics, seeded_partition
from .segmentation import infinite_edge_matrix

N_TYPES = len(NodeType)
CHECKPOINT_FORMAT = "rigkit-gae"
CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    pass


@dataclass
class LinkPredGraph:
    nodes: list[str]
    X: np.ndarray
    # undirected pairs (i < j) in edge insertion order, with their source edge
    pairs: list[tuple[int, int]]
    edge_keys: list[EdgeKey]
    index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self.index:
            self.index = {n: i for i, n in enumerate(self.nodes)}
        self._pairset = {frozenset(p) for p in self.pairs}

    def has_edge(self, u: str, v: str) -> bool:
        return frozenset((self.index[u], self.index[v])) in self._pairset

    @property
    def width(self) -> int:
        return self.X.shape[1]


def to_linkpred(g: RIGraph, width: int) -> LinkPredGraph:
    """Move edge vectors onto both endpoint nodes (raw counts)."""
    nodes = list(g.nodes)
    index = {n: i for i, n in enumerate(nodes)}
    X = np.zeros((len(nodes), N_TYPES + width), dtype=float)
    for i, n in enumerate(nodes):
        X[i, g.nodes[n].node_type.index] = 1.0
    evec = infinite_edge_matrix(g, width)
    pairs, keys = [], []
    for row, (key, edge) in enumerate(g.edges.items()):
        u, v = index[edge.from_id], index[edge.to_id]
        X[u, N_TYPES:] += evec[row]
        X[v, N_TYPES:] += evec[row]
        pairs.append((min(u, v), max(u, v)))
        keys.append(key)
    return LinkPredGraph(nodes, X, pairs, keys, index)


def prepare_features(X: np.ndarray, scale: bool = True, node_only: bool = False) -> np.ndarray:
    """Training features: log1p + per-column max scaling of the edge part."""
    if node_only:
        return X[:, :N_TYPES].copy()
    out = X.copy()
    if scale:
        edge = np.log1p(out[:, N_TYPES:])
        colmax = edge.max(axis=0)
        colmax[colmax == 0] = 1.0
        out[:, N_TYPES:] = edge / colmax
    return out


@dataclass
class EdgeSplit:
    train_pos: list[tuple[int, int]]
    test_pairs: list[tuple[int, int]]
    test_labels: list[bool]  # True = abnormal
    test_keys: list[EdgeKey]


def split_edges(lp: LinkPredGraph, labels: Mapping[EdgeKey, Label], train_fraction: float = 0.5,
                seed: int = 0) -> EdgeSplit:
    """Train on a random fraction of the NORMAL edges; test on the rest."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    normal = [i for i, k in enumerate(lp.edge_keys) if labels[k] is Label.NORMAL]
    if len(normal) < 2:
        raise ValueError(f"need at least 2 NORMAL edges to split, got {len(normal)}")
    train_idx, _ = seeded_partition(normal, [train_fraction, 1 - train_fraction], seed)
    train_set = set(train_idx)
    test_idx = [i for i in range(len(lp.pairs)) if i not in train_set]
    return EdgeSplit(
        train_pos=[lp.pairs[i] for i in sorted(train_set)],
        test_pairs=[lp.pairs[i] for i in test_idx],
        test_labels=[labels[lp.edge_keys[i]] is Label.ABNORMAL for i in test_idx],
        test_keys=[lp.edge_keys[i] for i in test_idx],
    )


def normalized_adjacency(n: int, pairs: Sequence[tuple[int, int]]) -> sp.csr_matrix:
    """``D^-1/2 (A + I) D^-1/2`` as a symmetric sparse matrix."""
    if pairs:
        p = np.asarray(pairs, dtype=np.int64)
        rows = np.concatenate([p[:, 0], p[:, 1], np.arange(n)])
        cols = np.concatenate([p[:, 1], p[:, 0], np.arange(n)])
    else:
        rows = cols = np.arange(n)
    A = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    A.data[:] = 1.0  # collapse duplicate pairs
    deg = np.asarray(A.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(deg)
    return (sp.diags(dinv) @ A @ sp.diags(dinv)).tocsr()


SCORE_GRAPHS = ("observed", "train")


@dataclass
class GAEConfig:
    hidden: tuple[int, int] = (32, 16)
    lr: float = 0.01
    epochs: int = 10_000
    neg_ratio: float = 1.0
    seed: int = 0
    optimizer: str = "gd"
    scale_attributes: bool = True
    node_attrs_only: bool = False
    # adjacency used when scoring: "observed" (every edge in the graph; the
    # detector judges edges it has seen, labels are never used) or "train"
    # (training positives only). Training always sees train edges only.
    score_graph: str = "observed"

    def __post_init__(self) -> None:
        if self.score_graph not in SCORE_GRAPHS:
            raise ValueError(f"score_graph must be one of {SCORE_GRAPHS}, got {self.score_graph!r}")


@dataclass
class GAEModel:
    W0: np.ndarray
    W1: np.ndarray
    config: GAEConfig

    def to_json(self) -> str:
        def mat(m: np.ndarray) -> dict:
            return {"shape": list(m.shape), "data": [float(x) for x in m.ravel(order="C")]}

        cfg = asdict(self.config)
        cfg["hidden"] = list(cfg["hidden"])
        doc = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "hyperparams": cfg,
            "seed": self.config.seed,
            "W0": mat(self.W0),
            "W1": mat(self.W1),
        }
        return json.dumps(doc) + "\n"

    @classmethod
    def from_json(cls, text: str) -> GAEModel:
        doc = json.loads(text)
        if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
            raise ValueError("not a rigkit GAE checkpoint (or unsupported version)")
        cfg = dict(doc["hyperparams"])
        cfg["hidden"] = tuple(cfg["hidden"])

        def mat(d: dict) -> np.ndarray:
            return np.asarray(d["data"], dtype=np.float64).reshape(d["shape"])

        return cls(mat(doc["W0"]), mat(doc["W1"]), GAEConfig(**cfg))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


def init_weights(in_dim: int, hidden: tuple[int, int], rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Glorot-uniform initialisation."""
    h0, h1 = hidden
    l0 = math.sqrt(6.0 / (in_dim + h0))
    l1 = math.sqrt(6.0 / (h0 + h1))
    return rng.uniform(-l0, l0, (in_dim, h0)), rng.uniform(-l1, l1, (h0, h1))


class _Encoder:
    """Forward/backward for fixed inputs; weights are passed in per call."""

    def __init__(self, A: sp.csr_matrix, X: np.ndarray) -> None:
        self.A = A
        # columns that are zero everywhere contribute nothing to either pass
        self.active = np.flatnonzero(np.any(X != 0, axis=0))
        self.AX = np.asarray(A @ X[:, self.active])

    def embed(self, W0: np.ndarray, W1: np.ndarray) -> np.ndarray:
        P = self.AX @ W0[self.active]
        return np.asarray(self.A @ np.maximum(P, 0.0)) @ W1

    def loss_and_grads(self, W0: np.ndarray, W1: np.ndarray, pos: np.ndarray,
                       neg: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        P = self.AX @ W0[self.active]
        H = np.maximum(P, 0.0)
        AH = np.asarray(self.A @ H)
        Z = AH @ W1
        pairs = np.concatenate([pos, neg])
        y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
        zu, zv = Z[pairs[:, 0]], Z[pairs[:, 1]]
        logits = np.einsum("ij,ij->i", zu, zv)
        # BCE with logits: log(1 + e^-l) for y=1, log(1 + e^l) for y=0
        loss = float(np.mean(np.logaddexp(0.0, np.where(y == 1, -logits, logits))))
        dl = (_sigmoid(logits) - y) / len(y)
        dZ = np.zeros_like(Z)
        np.add.at(dZ, pairs[:, 0], dl[:, None] * zv)
        np.add.at(dZ, pairs[:, 1], dl[:, None] * zu)
        dW1 = AH.T @ dZ
        dH = np.asarray(self.A.T @ (dZ @ W1.T))
        dP = dH * (P > 0)
        dW0 = np.zeros_like(W0)
        dW0[self.active] = self.AX.T @ dP
        return loss, dW0, dW1


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


class NegativeSampler:
    """Uniform unordered non-edges, self pairs excluded."""

    def __init__(self, n: int, positives: Sequence[tuple[int, int]], rng: np.random.Generator) -> None:
        self.n = n
        self.rng = rng
        p = np.asarray(positives, dtype=np.int64).reshape(-1, 2)
        self._taken = np.unique(np.minimum(p[:, 0], p[:, 1]) * n + np.maximum(p[:, 0], p[:, 1]))
        self.capacity = n * (n - 1) // 2 - len(self._taken)

    def sample(self, k: int) -> np.ndarray:
        if k <= 0 or self.capacity <= 0:
            return np.zeros((0, 2), dtype=np.int64)
        out = np.zeros((0, 2), dtype=np.int64)
        while len(out) < k:
            m = 2 * (k - len(out)) + 8
            a = self.rng.integers(0, self.n, m)
            b = self.rng.integers(0, self.n, m)
            keep = a != b
            a, b = a[keep], b[keep]
            code = np.minimum(a, b) * self.n + np.maximum(a, b)
            keep = ~np.isin(code, self._taken)
            out = np.concatenate([out, np.stack([a[keep], b[keep]], axis=1)])
        return out[:k]


@dataclass
class TrainResult:
    model: GAEModel
    loss_trace: list[float]


def train(lp: LinkPredGraph, train_pos: Sequence[tuple[int, int]], config: GAEConfig | None = None,
          init: tuple[np.ndarray, np.ndarray] | None = None, X: np.ndarray | None = None) -> TrainResult:
    """Full-batch training; negatives are resampled every epoch."""
    cfg = config or GAEConfig()
    if X is None:
        X = prepare_features(lp.X, cfg.scale_attributes, cfg.node_attrs_only)
    n = X.shape[0]
    rng = np.random.default_rng(cfg.seed)
    if init is None:
        W0, W1 = init_weights(X.shape[1], cfg.hidden, rng)
    else:
        W0, W1 = (np.array(w, dtype=float) for w in init)
        if W0.shape[0] != X.shape[1] or W0.shape[1] != W1.shape[0]:
            raise ValueError(f"weight shapes {W0.shape}, {W1.shape} do not fit input width {X.shape[1]}")
    enc = _Encoder(normalized_adjacency(n, train_pos), X)
    pos = np.asarray(train_pos, dtype=np.int64).reshape(-1, 2)
    sampler = NegativeSampler(n, train_pos, rng)
    n_neg = int(round(cfg.neg_ratio * len(pos)))
    opt = _make_optimizer(cfg)
    trace: list[float] = []
    for epoch in range(1, cfg.epochs + 1):
        neg = sampler.sample(n_neg)
        loss, g0, g1 = enc.loss_and_grads(W0, W1, pos, neg)
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        trace.append(loss)
        W0, W1 = opt(W0, W1, g0, g1)
    return TrainResult(GAEModel(W0, W1, cfg), trace)


def _make_optimizer(cfg: GAEConfig):
    if cfg.optimizer == "gd":
        def step(W0, W1, g0, g1):
            return W0 - cfg.lr * g0, W1 - cfg.lr * g1
        return step
    if cfg.optimizer == "adam":
        b1, b2, eps = 0.9, 0.999, 1e-8
        state = {"t": 0, "m": None, "v": None}

        def step(W0, W1, g0, g1):
            grads = (g0, g1)
            if state["m"] is None:
                state["m"] = [np.zeros_like(g) for g in grads]
                state["v"] = [np.zeros_like(g) for g in grads]
            state["t"] += 1
            t = state["t"]
            out = []
            for i, (w, g) in enumerate(zip((W0, W1), grads)):
                state["m"][i] = b1 * state["m"][i] + (1 - b1) * g
                state["v"][i] = b2 * state["v"][i] + (1 - b2) * g * g
                mhat = state["m"][i] / (1 - b1**t)
                vhat = state["v"][i] / (1 - b2**t)
                out.append(w - cfg.lr * mhat / (np.sqrt(vhat) + eps))
            return tuple(out)
        return step
    raise ValueError(f"unknown optimizer {cfg.optimizer!r}")


def embed(model: GAEModel, lp: LinkPredGraph, adjacency: Sequence[tuple[int, int]],
          X: np.ndarray | None = None) -> np.ndarray:
    if X is None:
        X = prepare_features(lp.X, model.config.scale_attributes, model.config.node_attrs_only)
    enc = _Encoder(normalized_adjacency(X.shape[0], adjacency), X)
    return enc.embed(model.W0, model.W1)


@dataclass(frozen=True)
class EdgeScore:
    pair: tuple[str, str]
    score: float


def score_pairs(Z: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    p = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return _sigmoid(np.einsum("ij,ij->i", Z[p[:, 0]], Z[p[:, 1]]))


def score_edges(model: GAEModel, lp: LinkPredGraph, adjacency: Sequence[tuple[int, int]],
                pairs: Sequence[tuple[str, str]]) -> list[EdgeScore]:
    """Score node-id pairs, propagating over ``adjacency`` (index pairs)."""
    idx = []
    for u, v in pairs:
        if u not in lp.index or v not in lp.index:
            raise KeyError(f"unknown node in pair ({u!r}, {v!r})")
        idx.append((lp.index[u], lp.index[v]))
    Z = embed(model, lp, adjacency)
    scores = score_pairs(Z, idx) if idx else np.zeros(0)
    return [EdgeScore((u, v), float(s)) for (u, v), s in zip(pairs, scores)]


SWEEP_GRID = np.round(np.arange(101) * 0.01, 2)


@dataclass
class Classification:
    threshold: float
    confusion: ConfusionMatrix
    metrics: Metrics


def classify_at(scores: np.ndarray, labels: np.ndarray, threshold: float) -> Classification:
    cm = ConfusionMatrix.from_predictions(scores < threshold, labels)
    return Classification(float(threshold), cm, metrics(cm))


def classify(scores: Sequence[float], test_labels: Sequence[bool],
             threshold: float | None = None) -> Classification:
    """Predict ABNORMAL iff score < threshold; ``threshold=None`` sweeps a 0.01 grid.

    The sweep keeps the lowest threshold among those reaching the best F1.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(test_labels, dtype=bool)
    if len(s) == 0:
        raise ValueError("empty test set")
    if threshold is not None:
        if not 0.0 <= threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        return classify_at(s, y, threshold)
    best = None
    for t in SWEEP_GRID:
        c = classify_at(s, y, float(t))
        if best is None or c.metrics.f1 > best.metrics.f1:
            best = c
    return best


@dataclass
class GAERun:
    lp: LinkPredGraph
    split: EdgeSplit
    result: TrainResult
    test_scores: np.ndarray
    classification: Classification


def run_protocol(g: RIGraph, labels: Mapping[EdgeKey, Label], width: int,
                 config: GAEConfig | None = None, threshold: float | None = None,
                 train_fraction: float = 0.5) -> GAERun:
    """Convert, split normal edges, train, score held-out edges, classify."""
    cfg = config or GAEConfig()
    lp = to_linkpred(g, width)
    split = split_edges(lp, labels, train_fraction, cfg.seed)
    X = prepare_features(lp.X, cfg.scale_attributes, cfg.node_attrs_only)
    res = train(lp, split.train_pos, cfg, X=X)
    adj = lp.pairs if cfg.score_graph == "observed" else split.train_pos
    Z = embed(res.model, lp, adj, X=X)
    scores = score_pairs(Z, split.test_pairs)
    return GAERun(lp, split, res, scores, classify(scores, split.test_labels, threshold))
