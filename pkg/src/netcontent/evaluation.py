"""Metrics, stratified splits and the three-way ablation.

The ablation compares

* ``combined``: content features with the graph-smoothness penalty,
* ``content_only``: the same model with ``lambda_s = 0``,
* ``network_only``: each tweet described by its row of the tweet-graph
  adjacency matrix (singleton groups, ``lambda_s = 0``).

Precision, recall and F1 refer to the positive class.  Zero denominators
give 0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import ValidationError
from .features import FeatureConfig, FeatureGroups, TweetRecord, assign_groups, build_matrix
from .graph import DEFAULT_DAMPING, TweetGraph, graph_laplacian
from .solver import Hyperparams, fit, label_matrix, predict_labels

MODES = ("combined", "content_only", "network_only")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValidationError("confusion counts must be nonnegative")

    @classmethod
    def from_labels(cls, truth, predicted) -> "ConfusionCounts":
        t = np.asarray(truth).astype(bool)
        p = np.asarray(predicted).astype(bool)
        if t.shape != p.shape:
            raise ValidationError("truth and predictions differ in length")
        return cls(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(~t & ~p)), int(np.sum(t & ~p)))

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)


def f1_score(precision: float, recall: float) -> float:
    s = precision + recall
    return 2 * precision * recall / s if s > 0 else 0.0


def metrics(c: ConfusionCounts) -> tuple[float, float, float]:
    """``(precision, recall, f1)``."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    return precision, recall, f1_score(precision, recall)


def _check_labels(labels):
    labels = np.asarray(labels).astype(int)
    if np.unique(labels).size < 2:
        raise ValidationError("both classes must be present")
    return labels


def stratified_split(labels, fraction: float = 0.8, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Train/test index arrays with per-class shares preserved.

    Each class contributes ``round(fraction * n_class)`` training items.
    Both index arrays come back sorted.
    """
    if not 0 < fraction < 1:
        raise ValidationError(f"train fraction must lie strictly between 0 and 1, got {fraction}")
    labels = _check_labels(labels)
    rng = np.random.default_rng(seed)
    train = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        k = int(round(fraction * idx.size))
        train.append(rng.permutation(idx)[:k])
    train = np.sort(np.concatenate(train))
    test = np.setdiff1d(np.arange(labels.size), train)
    if train.size == 0 or test.size == 0:
        raise ValidationError("split leaves an empty train or test set")
    return train, test


def stratified_kfold(labels, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    if k < 2:
        raise ValidationError("need at least 2 folds")
    labels = _check_labels(labels)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(labels.size, dtype=int)
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        fold_of[idx] = np.arange(idx.size) % k
    return [(np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)) for f in range(k)]


@dataclass(frozen=True)
class Dataset:
    """Tweet graph, records and labels sharing one tweet order."""

    graph: TweetGraph
    records: tuple
    labels: np.ndarray

    def __post_init__(self):
        ids = tuple(r.tweet_id for r in self.records)
        if ids != self.graph.nodes:
            bad = next((a for a, b in zip(ids, self.graph.nodes) if a != b), None)
            raise ValidationError(f"records are not in tweet-graph order (first mismatch {bad!r})")
        if len(self.labels) != len(ids):
            raise ValidationError("one label per tweet required")

    @classmethod
    def build(cls, graph: TweetGraph, records: Sequence[TweetRecord], labels: dict) -> "Dataset":
        by_id = {r.tweet_id: r for r in records}
        missing = [t for t in graph.nodes if t not in by_id or t not in labels]
        if missing:
            raise ValidationError(f"tweet {missing[0]!r} lacks a record or a label")
        return cls(graph, tuple(by_id[t] for t in graph.nodes),
                   np.array([int(labels[t]) for t in graph.nodes]))


@dataclass(frozen=True)
class AblationConfig:
    mode: str = "combined"
    hyperparams: Hyperparams = Hyperparams()
    train_fraction: float = 0.8
    seed: int = 0
    damping: float = DEFAULT_DAMPING
    features: FeatureConfig = FeatureConfig()
    norm: str = "unit-l2"
    transductive: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        if not 0 < self.train_fraction < 1:
            raise ValidationError("train fraction must lie in (0, 1)")


@dataclass
class AblationRow:
    mode: str
    f1: float
    precision: float
    recall: float
    counts: ConfusionCounts = field(default_factory=ConfusionCounts)


def _content_model(config: AblationConfig, data: Dataset, train, test):
    h = config.hyperparams
    if config.mode == "content_only":
        h = h.replace(lambda_s=0.0)
    train_recs = [data.records[i] for i in train]
    test_recs = [data.records[i] for i in test]
    X_train, vocab = build_matrix(train_recs, None, config.norm, config.features)
    X_test, _ = build_matrix(test_recs, vocab, config.norm, config.features)
    groups = assign_groups(vocab, config.features.pos_colored)
    Y = label_matrix(data.labels[train])
    if h.lambda_s == 0:
        L = np.zeros((len(train), len(train)))
        w, _ = fit(X_train, Y, L, h, groups)
    elif config.transductive:
        X_all, _ = build_matrix(list(data.records), vocab, config.norm, config.features)
        L = graph_laplacian(data.graph, config.damping)
        w, _ = fit(X_train, Y, L, h, groups, x_graph=X_all)
    else:
        L = graph_laplacian(data.graph.subgraph([data.graph.nodes[i] for i in train]), config.damping)
        w, _ = fit(X_train, Y, L, h, groups)
    return predict_labels(X_test, w)


def _normalize_columns(A):
    norms = np.sqrt(np.asarray(A.multiply(A).sum(axis=0))).ravel()
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return (A @ sparse.diags(scale)).tocsr()


def _network_model(config: AblationConfig, data: Dataset, train, test):
    # features are links to training tweets: a new tweet can only be
    # described through tweets known at training time
    h = config.hyperparams.replace(lambda_s=0.0)
    A = data.graph.adjacency.tocsr()[train].tocsc()
    X_train, X_test = A[:, train], A[:, test]
    if config.norm == "unit-l2":
        X_train, X_test = _normalize_columns(X_train), _normalize_columns(X_test)
    active = np.flatnonzero(np.asarray(X_train.getnnz(axis=1)) > 0)
    X_train, X_test = X_train.tocsr()[active], X_test.tocsr()[active]
    Y = label_matrix(data.labels[train])
    w, _ = fit(X_train, Y, np.zeros((len(train), len(train))), h, FeatureGroups.singletons(len(active)))
    return predict_labels(X_test, w)


def run_split(config: AblationConfig, data: Dataset, train, test) -> ConfusionCounts:
    if config.mode == "network_only":
        pred = _network_model(config, data, train, test)
    else:
        pred = _content_model(config, data, train, test)
    return ConfusionCounts.from_labels(data.labels[test], pred)


def run_mode(config: AblationConfig, data: Dataset, folds: int | None = None) -> AblationRow:
    """One ablation mode on a single split, or averaged over stratified folds."""
    if folds:
        per_fold = [metrics(run_split(config, data, tr, te))
                    for tr, te in stratified_kfold(data.labels, folds, config.seed)]
        p, r, f = (float(np.mean(v)) for v in zip(*per_fold))
        return AblationRow(config.mode, f, p, r)
    train, test = stratified_split(data.labels, config.train_fraction, config.seed)
    counts = run_split(config, data, train, test)
    p, r, f = metrics(counts)
    return AblationRow(config.mode, f, p, r, counts)


def run_ablation(config: AblationConfig, data: Dataset, modes: Sequence[str] = MODES,
                 folds: int | None = None) -> list[AblationRow]:
    """One row per mode, in the order given; ``config.mode`` is overridden."""
    rows = []
    for mode in modes:
        cfg = AblationConfig(mode, config.hyperparams, config.train_fraction, config.seed,
                             config.damping, config.features, config.norm, config.transductive)
        rows.append(run_mode(cfg, data, folds))
    return rows


def format_table(rows: Sequence[AblationRow]) -> str:
    lines = ["mode\tf1\tprecision\trecall"]
    lines += [f"{r.mode}\t{r.f1:.3f}\t{r.precision:.3f}\t{r.recall:.3f}" for r in rows]
    return "\n".join(lines) + "\n"


def table_json(rows: Sequence[AblationRow]) -> str:
    doc = [{"mode": r.mode, "f1": round(r.f1, 3), "precision": round(r.precision, 3),
            "recall": round(r.recall, 3)} for r in rows]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
