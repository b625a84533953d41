"""Metrics, mutual information, and cross-validated scoring.

The cross_validate function is the single scoring path the training loop
sees: stratified folds for classification, contiguous shuffled folds for
regression, mean of the per-fold metric.  Evaluators are tiny adapters
over the in-repo forest, single tree, and a ridge linear model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .errors import ConstantTruth, EmptyInput, LengthMismatch, TooFewRows
from .forest import ForestParams, fit_forest, fit_tree
from .tabular import Task


def f1_score(y_true: np.ndarray, y_pred: np.ndarray, averaging: str = "weighted") -> float:
    """Multiclass F1 with the 0/0 := 0 convention per class.

    Classes are the union of truth and prediction values; weighted mode
    weights by truth support, macro averages equally.
    """
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape:
        raise LengthMismatch(t.shape[0], p.shape[0])
    classes = np.union1d(t, p)
    f1s = np.zeros(classes.size)
    supports = np.zeros(classes.size)
    for i, c in enumerate(classes):
        tp = np.sum((p == c) & (t == c))
        fp = np.sum((p == c) & (t != c))
        fn = np.sum((p != c) & (t == c))
        prec = tp / (tp + fp) if tp + fp > 0 else 0.0
        rec = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1s[i] = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        supports[i] = np.sum(t == c)
    if averaging == "macro":
        return float(f1s.mean())
    if supports.sum() == 0:
        return 0.0
    return float((f1s * supports).sum() / supports.sum())


def one_minus_rae(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """1 - (sum absolute error / sum absolute deviation from the mean)."""
    t = np.asarray(y_true, dtype=np.float64)
    p = np.asarray(y_pred, dtype=np.float64)
    if t.shape != p.shape:
        raise LengthMismatch(t.shape[0], p.shape[0])
    denom = np.abs(t - t.mean()).sum()
    if denom == 0.0:
        raise ConstantTruth("truth values are constant, RAE undefined")
    return float(1.0 - np.abs(t - p).sum() / denom)


def quantile_bins(values: np.ndarray, bins: int) -> np.ndarray:
    """Equal-frequency bin codes.

    Bin edges are the inner quantiles of the data, so identical values
    always share a bin; the code range is [0, bins - 1] but sparse data
    may occupy fewer distinct codes.
    """
    v = np.asarray(values, dtype=np.float64)
    edges = np.quantile(v, np.arange(1, bins) / bins)
    return np.searchsorted(edges, v, side="right")


def mutual_information(
    feature: np.ndarray,
    labels: np.ndarray,
    task: Task,
    bins: int = 20,
) -> float:
    """Histogram mutual information in nats.

    The feature is always quantile-binned; classification labels are used
    as categories directly while regression labels are binned the same
    way as the feature.
    """
    f = quantile_bins(feature, bins)
    if task is Task.CLASSIFICATION:
        y = np.asarray(labels, dtype=np.int64)
    else:
        y = quantile_bins(labels, bins)
    n = f.shape[0]
    if n == 0 or y.shape[0] != n:
        raise LengthMismatch(n, y.shape[0])
    joint = np.zeros((int(f.max()) + 1, int(y.max()) + 1), dtype=np.float64)
    np.add.at(joint, (f, y), 1.0)
    joint /= n
    pf = joint.sum(axis=1)
    py = joint.sum(axis=0)
    mask = joint > 0.0
    outer = np.outer(pf, py)
    return float(np.sum(joint[mask] * np.log(joint[mask] / outer[mask])))


# ------------------------------------------------------------- evaluators


@dataclass
class RidgeModel:
    """Closed-form ridge over standardized features.

    Classification is one-vs-rest on +-1 targets with argmax decoding,
    which keeps the same fit/predict surface as the trees.
    """

    task: Task
    alpha: float = 1.0
    mean_: np.ndarray = None
    scale_: np.ndarray = None
    coef_: np.ndarray = None
    classes_: np.ndarray = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RidgeModel":
        X = np.asarray(X, dtype=np.float64)
        if X.size == 0:
            raise EmptyInput("ridge needs a nonempty matrix")
        y = np.asarray(y, dtype=np.float64)
        self.mean_ = X.mean(axis=0)
        self.scale_ = np.where(X.std(axis=0) > 0.0, X.std(axis=0), 1.0)
        Z = (X - self.mean_) / self.scale_
        Z = np.column_stack([Z, np.ones(Z.shape[0])])
        if self.task is Task.CLASSIFICATION:
            self.classes_ = np.unique(y)
            T = np.where(y[:, None] == self.classes_[None, :], 1.0, -1.0)
        else:
            T = y[:, None]
        reg = self.alpha * np.eye(Z.shape[1])
        reg[-1, -1] = 0.0  # do not shrink the intercept
        self.coef_ = np.linalg.solve(Z.T @ Z + reg, Z.T @ T)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_
        Z = np.column_stack([Z, np.ones(Z.shape[0])])
        scores = Z @ self.coef_
        if self.task is Task.CLASSIFICATION:
            return self.classes_[np.argmax(scores, axis=1)]
        return scores[:, 0]


class _ForestEvaluator:
    def __init__(self, task: Task, params: ForestParams, seed: int):
        self.task = task
        self.params = params
        self.seed = seed
        self.model = None

    def fit(self, X, y):
        self.model = fit_forest(X, y, self.task, self.params, self.seed)
        return self

    def predict(self, X):
        return self.model.predict(X)


class _TreeEvaluator:
    def __init__(self, task: Task, max_depth: int, min_leaf: int):
        self.task = task
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.model = None

    def fit(self, X, y):
        self.model = fit_tree(X, y, self.task, self.max_depth, self.min_leaf)
        return self

    def predict(self, X):
        return self.model.predict(X)


def make_evaluator(name: str, task: Task, config: PipelineConfig, seed: int):
    """Evaluator instances share a fit/predict surface; name picks one."""
    if name == "forest":
        params = ForestParams(config.forest_trees, config.forest_max_depth, config.forest_min_leaf)
        return _ForestEvaluator(task, params, seed)
    if name == "tree":
        return _TreeEvaluator(task, config.forest_max_depth, config.forest_min_leaf)
    if name == "ridge":
        return RidgeModel(task)
    raise EmptyInput(f"unknown evaluator {name!r}")


def score(task: Task, y_true: np.ndarray, y_pred: np.ndarray, averaging: str = "weighted") -> float:
    if task is Task.CLASSIFICATION:
        return f1_score(y_true, y_pred, averaging)
    return one_minus_rae(y_true, y_pred)


def fold_indices(y: np.ndarray, task: Task, folds: int, seed: int) -> list[np.ndarray]:
    """Deterministic fold assignment; stratified for classification.

    Classification deals each class's shuffled rows round-robin across
    folds with a running fold cursor, which keeps fold sizes within one
    row of each other.  Regression shuffles and slices contiguously.
    """
    n = y.shape[0]
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int64)
    if task is Task.CLASSIFICATION:
        cursor = 0
        for cls in np.unique(y):
            members = np.flatnonzero(y == cls)
            members = members[rng.permutation(members.size)]
            for m in members:
                assignment[m] = cursor % folds
                cursor += 1
    else:
        perm = rng.permutation(n)
        for f, chunk in enumerate(np.array_split(perm, folds)):
            assignment[chunk] = f
    return [np.flatnonzero(assignment == f) for f in range(folds)]


def cross_validate(
    X: np.ndarray,
    y: np.ndarray,
    task: Task,
    config: PipelineConfig,
    folds: int = 5,
    seed: int = 0,
) -> float:
    """Mean held-out metric over deterministic folds.

    Per-fold models get seeds spawned from the fold seed so repeated
    calls with identical inputs return the identical mean.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n < folds:
        raise TooFewRows(n, folds, "cross-validation")
    parts = fold_indices(y, task, folds, seed)
    fold_seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(folds)]
    scores = []
    for f, held in enumerate(parts):
        if held.size == 0:
            continue
        train = np.setdiff1d(np.arange(n), held, assume_unique=True)
        model = make_evaluator(config.evaluator, task, config, fold_seeds[f])
        model.fit(X[train], y[train])
        pred = model.predict(X[held])
        scores.append(score(task, y[held], pred, config.metric_averaging))
    return float(np.mean(scores))
