"""From-scratch random forest for binary report classification.

Trees are grown on bootstrap samples with Gini-impurity splits over random
feature subsets; thresholds are midpoints between sorted distinct values.
Split ties break toward the lowest feature index, then the lowest threshold,
so training is reproducible. Per-tree RNG streams derive from the seed, so
results do not depend on build order; a trained model is immutable.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import FeatureSchema, ProjectionPair, Standardizer

MODEL_FORMAT = "phishreports-forest"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """The file is not a readable model container."""


class ModelVersionError(ValueError):
    """The container version is not supported by this code."""


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")

    def to_json(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "features_per_split": self.features_per_split,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ForestParams":
        return cls(**obj)


@dataclass
class Tree:
    """Flat node arrays; ``feature[i] == -1`` marks a leaf with class
    probability ``prob[i]``. Rows go left when value <= threshold."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    prob: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.nonzero(self.feature[node] >= 0)[0]
        while rows.size:
            current = node[rows]
            go_left = X[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
            rows = rows[self.feature[node[rows]] >= 0]
        return self.prob[node]

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "prob": self.prob.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Tree":
        return cls(
            feature=np.asarray(obj["feature"], dtype=np.int64),
            threshold=np.asarray(obj["threshold"], dtype=float),
            left=np.asarray(obj["left"], dtype=np.int64),
            right=np.asarray(obj["right"], dtype=np.int64),
            prob=np.asarray(obj["prob"], dtype=float),
        )


@dataclass
class ForestModel:
    params: ForestParams
    trees: list[Tree]
    standardizer: Standardizer
    n_features: int
    projections: ProjectionPair | None = None
    schema: FeatureSchema | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "params": self.params.to_json(),
            "n_features": self.n_features,
            "standardizer": self.standardizer.to_json(),
            "projections": self.projections.to_json() if self.projections else None,
            "schema": self.schema.to_json() if self.schema else None,
            "trees": [t.to_json() for t in self.trees],
            "meta": self.meta,
        }


def _best_split(
    X: np.ndarray, y: np.ndarray, rows: np.ndarray, features: np.ndarray, min_leaf: int
) -> tuple[int, float] | None:
    """Best (feature, threshold) by weighted-Gini minimization.

    Features are scanned in ascending index and thresholds in ascending
    value with strict improvement, so ties resolve to the lowest feature
    then the lowest threshold.
    """
    n = rows.size
    best: tuple[int, float] | None = None
    best_score = math.inf
    parent_labels = y[rows]
    for f in features:
        col = X[rows, f]
        order = np.argsort(col, kind="mergesort")
        sorted_vals = col[order]
        sorted_y = parent_labels[order]
        boundaries = np.nonzero(sorted_vals[:-1] < sorted_vals[1:])[0]
        if boundaries.size == 0:
            continue
        n_left = boundaries + 1
        n_right = n - n_left
        if min_leaf > 1:
            keep = (n_left >= min_leaf) & (n_right >= min_leaf)
            boundaries, n_left, n_right = boundaries[keep], n_left[keep], n_right[keep]
            if boundaries.size == 0:
                continue
        pos_prefix = np.cumsum(sorted_y)
        pos_left = pos_prefix[boundaries]
        pos_right = pos_prefix[-1] - pos_left
        p_left = pos_left / n_left
        p_right = pos_right / n_right
        gini_left = 1.0 - p_left**2 - (1.0 - p_left) ** 2
        gini_right = 1.0 - p_right**2 - (1.0 - p_right) ** 2
        weighted = (n_left * gini_left + n_right * gini_right) / n
        idx = int(np.argmin(weighted))
        if weighted[idx] < best_score:
            best_score = float(weighted[idx])
            b = boundaries[idx]
            best = (int(f), float((sorted_vals[b] + sorted_vals[b + 1]) / 2.0))
    if best is None:
        return None
    # Reject splits that do not improve on the parent impurity.
    p = parent_labels.mean()
    parent_gini = 1.0 - p**2 - (1.0 - p) ** 2
    if best_score >= parent_gini:
        return None
    return best


def _build_tree(
    X: np.ndarray, y: np.ndarray, params: ForestParams, rng: np.random.Generator
) -> Tree:
    n, d = X.shape
    m = params.features_per_split or math.ceil(math.sqrt(d))
    m = max(1, min(m, d))
    if params.bootstrap:
        sample = rng.integers(0, n, size=n)
    else:
        sample = np.arange(n)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    prob: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        prob.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack: list[tuple[int, np.ndarray, int]] = [(root, sample, 0)]
    while stack:
        node, rows, depth = stack.pop()
        labels = y[rows]
        p = float(labels.mean())
        depth_capped = params.max_depth is not None and depth >= params.max_depth
        if p in (0.0, 1.0) or depth_capped or rows.size < 2 * params.min_samples_leaf:
            prob[node] = p
            continue
        chosen = np.sort(rng.choice(d, size=m, replace=False)) if m < d else np.arange(d)
        split = _best_split(X, y, rows, chosen, params.min_samples_leaf)
        if split is None:
            prob[node] = p
            continue
        f, t = split
        mask = X[rows, f] <= t
        feature[node] = f
        threshold[node] = t
        left_id = new_node()
        right_id = new_node()
        left[node] = left_id
        right[node] = right_id
        # Push right first so the left child is processed (and numbered) in
        # depth-first order regardless of stack mechanics.
        stack.append((right_id, rows[~mask], depth + 1))
        stack.append((left_id, rows[mask], depth + 1))
    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        prob=np.asarray(prob, dtype=float),
    )


def train(
    X: np.ndarray,
    y: Sequence[bool] | np.ndarray,
    params: ForestParams = ForestParams(),
    standardizer: Standardizer | None = None,
    projections: ProjectionPair | None = None,
    schema: FeatureSchema | None = None,
    timestamp: int | None = None,
) -> ForestModel:
    """Fit the forest; deterministic given the seed.

    Standardization is part of the model boundary: when no fitted
    standardizer is supplied one is fitted on the training matrix, and
    predictions always pass through it.
    """
    X = np.asarray(X, dtype=float)
    y_arr = np.asarray(y, dtype=bool)
    if X.ndim != 2 or X.shape[0] != y_arr.shape[0]:
        raise ValueError("X must be 2-D with one label per row")
    if X.shape[0] < 2:
        raise ValueError("training needs at least 2 instances")
    bad = np.nonzero(~np.isfinite(X).all(axis=1))[0]
    if bad.size:
        raise ValueError(f"non-finite feature value in instance {int(bad[0])}")
    if y_arr.all() or not y_arr.any():
        raise ValueError("training needs both classes present")
    if params.features_per_split is not None and not 1 <= params.features_per_split <= X.shape[1]:
        raise ValueError("features_per_split must be in [1, n_features]")

    std = standardizer or Standardizer.fit(X)
    Xs = std.transform(X)
    yi = y_arr.astype(np.int64)
    streams = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    trees = [_build_tree(Xs, yi, params, np.random.Generator(np.random.PCG64(s))) for s in streams]
    meta = {
        "timestamp": timestamp,
        "corpus_hash": corpus_hash(X, y_arr),
        "n_train": int(X.shape[0]),
    }
    return ForestModel(
        params=params,
        trees=trees,
        standardizer=std,
        n_features=int(X.shape[1]),
        projections=projections,
        schema=schema,
        meta=meta,
    )


def corpus_hash(X: np.ndarray, y: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype=float).tobytes())
    h.update(np.ascontiguousarray(y, dtype=bool).tobytes())
    return h.hexdigest()


def predict_matrix(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Mean per-tree leaf probability for each row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    Xs = model.standardizer.transform(X)
    scores = np.zeros(len(Xs))
    for tree in model.trees:
        scores += tree.apply(Xs)
    return scores / len(model.trees)


def predict(model: ForestModel, vector: np.ndarray) -> float:
    return float(predict_matrix(model, np.asarray(vector, dtype=float)[None, :])[0])


def classify_post(
    model: ForestModel,
    instances: Sequence[tuple[object, np.ndarray]],
    threshold: float = 0.5,
) -> tuple[bool, list[float]]:
    """Post label by max-score OR over its instances (inclusive threshold)."""
    if not instances:
        raise ValueError("classify_post needs at least one instance")
    post_ids = {getattr(inst, "post_id") for inst, _ in instances}
    if len(post_ids) != 1:
        raise ValueError(f"instances span multiple posts: {sorted(post_ids)}")
    scores = [predict(model, vec) for _, vec in instances]
    return max(scores) >= threshold, scores


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    tpr: float | None
    tnr: float | None
    precision: float | None
    f_measure: float | None
    tp: int
    fp: int
    tn: int
    fn: int

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "tpr": self.tpr,
            "tnr": self.tnr,
            "precision": self.precision,
            "f_measure": self.f_measure,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
        }


def metrics_from_counts(tp: int, fp: int, tn: int, fn: int) -> Metrics:
    total = tp + fp + tn + fn
    if total == 0:
        raise ValueError("empty test set")
    tpr = tp / (tp + fn) if (tp + fn) else None
    tnr = tn / (tn + fp) if (tn + fp) else None
    precision = tp / (tp + fp) if (tp + fp) else None
    if precision is None or tpr is None:
        f_measure = None
    elif precision + tpr == 0:
        f_measure = 0.0
    else:
        f_measure = 2 * precision * tpr / (precision + tpr)
    return Metrics(
        accuracy=(tp + tn) / total,
        tpr=tpr,
        tnr=tnr,
        precision=precision,
        f_measure=f_measure,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


def evaluate(
    model: ForestModel,
    X: np.ndarray,
    y: Sequence[bool] | np.ndarray,
    threshold: float = 0.5,
) -> Metrics:
    """Confusion-matrix metrics at the given score threshold. A one-class
    test set yields None for the undefined entries rather than failing."""
    y_arr = np.asarray(y, dtype=bool)
    if y_arr.size == 0:
        raise ValueError("empty test set")
    scores = predict_matrix(model, X)
    predicted = scores >= threshold
    tp = int(np.sum(predicted & y_arr))
    fp = int(np.sum(predicted & ~y_arr))
    tn = int(np.sum(~predicted & ~y_arr))
    fn = int(np.sum(~predicted & y_arr))
    return metrics_from_counts(tp, fp, tn, fn)


def save(model: ForestModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, sort_keys=True, separators=(",", ":"))


def load(path: str) -> ForestModel:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"corrupt model file: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a forest model container")
    if obj.get("version") != MODEL_VERSION:
        raise ModelVersionError(f"unsupported model version {obj.get('version')!r}")
    try:
        return ForestModel(
            params=ForestParams.from_json(obj["params"]),
            trees=[Tree.from_json(t) for t in obj["trees"]],
            standardizer=Standardizer.from_json(obj["standardizer"]),
            n_features=obj["n_features"],
            projections=ProjectionPair.from_json(obj["projections"]) if obj.get("projections") else None,
            schema=FeatureSchema.from_json(obj["schema"]) if obj.get("schema") else None,
            meta=obj.get("meta", {}),
        )
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"corrupt model file: missing {exc}") from exc
