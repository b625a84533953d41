"""In-repo CART trees and bagged random forests.

Split search and prediction run inside numba kernels; everything random
(bootstrap rows, per-node feature subsets) is drawn outside the kernels
from seeded numpy generators, so results are bit-identical run to run.

Split rules: candidate thresholds are midpoints between consecutive
distinct sorted values, gain must be strictly positive, and the feature
scan goes in ascending feature-index order with strict improvement, so
ties prefer the lower feature index.  Classification leaves keep class
counts (argmax with lowest-index ties at predict time); regression
leaves keep the mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import EmptyInput, SchemaMismatch, SingleClass
from .tabular import Task

_LEAF = -1


@njit(cache=True)
def _gini(counts, total):  # pragma: no cover - compiled
    acc = 0.0
    for c in counts:
        p = c / total
        acc += p * p
    return 1.0 - acc


@njit(cache=True)
def _grow_classification(
    X, y, rows, feat_orders, k_feats, max_depth, min_leaf, n_classes,
    feature, threshold, left, right, leaf_counts,
):  # pragma: no cover - compiled
    n = rows.shape[0]
    idx = rows.copy()
    max_nodes = feature.shape[0]
    st_node = np.empty(max_nodes, np.int64)
    st_lo = np.empty(max_nodes, np.int64)
    st_hi = np.empty(max_nodes, np.int64)
    st_depth = np.empty(max_nodes, np.int64)
    sp = 0
    st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp] = 0, 0, n, 0
    sp += 1
    node_count = 1
    vals = np.empty(n, np.float64)
    buf = np.empty(n, np.int64)
    lc = np.empty(n_classes, np.float64)
    rc = np.empty(n_classes, np.float64)

    while sp > 0:
        sp -= 1
        node, lo, hi, depth = st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp]
        size = hi - lo
        for k in range(n_classes):
            leaf_counts[node, k] = 0.0
        for i in range(lo, hi):
            leaf_counts[node, int(y[idx[i]])] += 1.0
        feature[node] = _LEAF
        pure = False
        for k in range(n_classes):
            if leaf_counts[node, k] == size:
                pure = True
        if pure or depth >= max_depth or size < 2 * min_leaf:
            continue

        parent_imp = _gini(leaf_counts[node], float(size))
        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        for kk in range(k_feats):
            f = feat_orders[node, kk]
            for i in range(size):
                vals[i] = X[idx[lo + i], f]
            order = np.argsort(vals[:size])
            for k in range(n_classes):
                lc[k] = 0.0
                rc[k] = leaf_counts[node, k]
            for i in range(size - 1):
                cls = int(y[idx[lo + order[i]]])
                lc[cls] += 1.0
                rc[cls] -= 1.0
                v_here = vals[order[i]]
                v_next = vals[order[i + 1]]
                if v_here == v_next:
                    continue
                nl = i + 1
                nr = size - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                child = (nl * _gini(lc, float(nl)) + nr * _gini(rc, float(nr))) / size
                gain = parent_imp - child
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.5 * (v_here + v_next)
        if best_feat < 0:
            continue

        # Stable partition: left block keeps rows with value <= threshold.
        nl = 0
        for i in range(lo, hi):
            if X[idx[i], best_feat] <= best_thr:
                buf[nl] = idx[i]
                nl += 1
        nr = nl
        for i in range(lo, hi):
            if X[idx[i], best_feat] > best_thr:
                buf[nr] = idx[i]
                nr += 1
        for i in range(size):
            idx[lo + i] = buf[i]

        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = node_count
        right[node] = node_count + 1
        st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp] = node_count, lo, lo + nl, depth + 1
        sp += 1
        st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp] = node_count + 1, lo + nl, hi, depth + 1
        sp += 1
        node_count += 2
    return node_count


@njit(cache=True)
def _grow_regression(
    X, y, rows, feat_orders, k_feats, max_depth, min_leaf,
    feature, threshold, left, right, leaf_value,
):  # pragma: no cover - compiled
    n = rows.shape[0]
    idx = rows.copy()
    max_nodes = feature.shape[0]
    st_node = np.empty(max_nodes, np.int64)
    st_lo = np.empty(max_nodes, np.int64)
    st_hi = np.empty(max_nodes, np.int64)
    st_depth = np.empty(max_nodes, np.int64)
    sp = 0
    st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp] = 0, 0, n, 0
    sp += 1
    node_count = 1
    vals = np.empty(n, np.float64)
    buf = np.empty(n, np.int64)

    while sp > 0:
        sp -= 1
        node, lo, hi, depth = st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp]
        size = hi - lo
        total = 0.0
        total_sq = 0.0
        for i in range(lo, hi):
            t = y[idx[i]]
            total += t
            total_sq += t * t
        mean = total / size
        leaf_value[node] = mean
        feature[node] = _LEAF
        parent_imp = total_sq / size - mean * mean
        if parent_imp <= 0.0 or depth >= max_depth or size < 2 * min_leaf:
            continue

        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        for kk in range(k_feats):
            f = feat_orders[node, kk]
            for i in range(size):
                vals[i] = X[idx[lo + i], f]
            order = np.argsort(vals[:size])
            lsum = 0.0
            lsq = 0.0
            for i in range(size - 1):
                t = y[idx[lo + order[i]]]
                lsum += t
                lsq += t * t
                v_here = vals[order[i]]
                v_next = vals[order[i + 1]]
                if v_here == v_next:
                    continue
                nl = i + 1
                nr = size - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                rsum = total - lsum
                rsq = total_sq - lsq
                var_l = lsq / nl - (lsum / nl) ** 2
                var_r = rsq / nr - (rsum / nr) ** 2
                child = (nl * var_l + nr * var_r) / size
                gain = parent_imp - child
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.5 * (v_here + v_next)
        if best_feat < 0:
            continue

        nl = 0
        for i in range(lo, hi):
            if X[idx[i], best_feat] <= best_thr:
                buf[nl] = idx[i]
                nl += 1
        nr = nl
        for i in range(lo, hi):
            if X[idx[i], best_feat] > best_thr:
                buf[nr] = idx[i]
                nr += 1
        for i in range(size):
            idx[lo + i] = buf[i]

        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = node_count
        right[node] = node_count + 1
        st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp] = node_count, lo, lo + nl, depth + 1
        sp += 1
        st_node[sp], st_lo[sp], st_hi[sp], st_depth[sp] = node_count + 1, lo + nl, hi, depth + 1
        sp += 1
        node_count += 2
    return node_count


@njit(cache=True)
def _tree_apply(X, feature, threshold, left, right, out):  # pragma: no cover
    for r in range(X.shape[0]):
        node = 0
        while feature[node] != _LEAF:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node


@dataclass
class DecisionTree:
    """One fitted CART tree as flat arrays indexed by node id."""

    task: Task
    n_features: int
    n_classes: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_counts: np.ndarray  # (nodes, n_classes); empty for regression
    leaf_value: np.ndarray  # (nodes,); empty for classification

    def apply(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.int64)
        _tree_apply(
            np.ascontiguousarray(X, dtype=np.float64),
            self.feature, self.threshold, self.left, self.right, out,
        )
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != self.n_features:
            raise SchemaMismatch(range(self.n_features), range(X.shape[1]))
        leaves = self.apply(X)
        if self.task is Task.CLASSIFICATION:
            return np.argmax(self.leaf_counts[leaves], axis=1).astype(np.float64)
        return self.leaf_value[leaves]


@dataclass
class ForestParams:
    trees: int = 100
    max_depth: int = 10
    min_leaf: int = 2


@dataclass
class RandomForest:
    task: Task
    n_features: int
    n_classes: int
    trees: list

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict(self, X)


def _max_nodes(n_rows: int, max_depth: int, min_leaf: int) -> int:
    leaves = min(math.ceil(n_rows / max(min_leaf, 1)), 2 ** min(max_depth, 30))
    return max(2 * leaves - 1, 3)


def _validate(X: np.ndarray, y: np.ndarray, task: Task) -> tuple[np.ndarray, np.ndarray, int]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyInput("need a nonempty 2-D feature matrix")
    if y.shape[0] != X.shape[0]:
        raise EmptyInput(f"{y.shape[0]} labels for {X.shape[0]} rows")
    n_classes = 0
    if task is Task.CLASSIFICATION:
        classes = np.unique(y)
        if classes.size < 2:
            raise SingleClass("classification needs at least two classes")
        n_classes = int(y.max()) + 1
    return X, y, n_classes


def _fit_one_tree(
    X: np.ndarray,
    y: np.ndarray,
    task: Task,
    n_classes: int,
    rows: np.ndarray,
    feat_orders: np.ndarray,
    k_feats: int,
    params: ForestParams,
) -> DecisionTree:
    max_nodes = feat_orders.shape[0]
    feature = np.empty(max_nodes, dtype=np.int64)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.zeros(max_nodes, dtype=np.int64)
    right = np.zeros(max_nodes, dtype=np.int64)
    if task is Task.CLASSIFICATION:
        counts = np.zeros((max_nodes, n_classes), dtype=np.float64)
        used = _grow_classification(
            X, y, rows, feat_orders, k_feats, params.max_depth, params.min_leaf,
            n_classes, feature, threshold, left, right, counts,
        )
        return DecisionTree(
            task, X.shape[1], n_classes,
            feature[:used].copy(), threshold[:used].copy(),
            left[:used].copy(), right[:used].copy(),
            counts[:used].copy(), np.empty(0),
        )
    value = np.zeros(max_nodes, dtype=np.float64)
    used = _grow_regression(
        X, y, rows, feat_orders, k_feats, params.max_depth, params.min_leaf,
        feature, threshold, left, right, value,
    )
    return DecisionTree(
        task, X.shape[1], 0,
        feature[:used].copy(), threshold[:used].copy(),
        left[:used].copy(), right[:used].copy(),
        np.empty((0, 0)), value[:used].copy(),
    )


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    task: Task,
    max_depth: int = 10,
    min_leaf: int = 2,
) -> DecisionTree:
    """Single deterministic CART tree: no bootstrap, all features at
    every split."""
    X, y, n_classes = _validate(X, y, task)
    n, p = X.shape
    max_nodes = _max_nodes(n, max_depth, min_leaf)
    feat_orders = np.tile(np.arange(p, dtype=np.int64), (max_nodes, 1))
    rows = np.arange(n, dtype=np.int64)
    return _fit_one_tree(
        X, y, task, n_classes, rows, feat_orders, p,
        ForestParams(1, max_depth, min_leaf),
    )


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    task: Task,
    params: ForestParams = ForestParams(),
    seed: int = 0,
) -> RandomForest:
    """Bagged forest: per-tree bootstrap rows and per-node feature subsets.

    Feature subset size is floor(sqrt(p)) for classification and
    floor(p/3) for regression, at least 1.  Tree seeds spawn from the
    master seed, so the forest is deterministic however it is scheduled.
    """
    X, y, n_classes = _validate(X, y, task)
    n, p = X.shape
    if task is Task.CLASSIFICATION:
        k_feats = max(1, int(math.sqrt(p)))
    else:
        k_feats = max(1, p // 3)
    max_nodes = _max_nodes(n, params.max_depth, params.min_leaf)
    trees = []
    seeds = np.random.SeedSequence(seed).spawn(params.trees)
    for ss in seeds:
        rng = np.random.default_rng(ss)
        rows = rng.integers(0, n, size=n).astype(np.int64)
        picks = rng.permuted(np.tile(np.arange(p, dtype=np.int64), (max_nodes, 1)), axis=1)
        feat_orders = np.ascontiguousarray(np.sort(picks[:, :k_feats], axis=1))
        trees.append(
            _fit_one_tree(X, y, task, n_classes, rows, feat_orders, k_feats, params)
        )
    return RandomForest(task, p, n_classes, trees)


def predict(model: RandomForest, X: np.ndarray) -> np.ndarray:
    """Majority vote (ties to the lowest class index) or mean over trees."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise SchemaMismatch(range(model.n_features), range(X.shape[1] if X.ndim == 2 else 0))
    if model.task is Task.CLASSIFICATION:
        votes = np.zeros((X.shape[0], model.n_classes), dtype=np.float64)
        for tree in model.trees:
            pred = tree.predict(X).astype(np.int64)
            votes[np.arange(X.shape[0]), pred] += 1.0
        return np.argmax(votes, axis=1).astype(np.float64)
    acc = np.zeros(X.shape[0], dtype=np.float64)
    for tree in model.trees:
        acc += tree.predict(X)
    return acc / len(model.trees)
