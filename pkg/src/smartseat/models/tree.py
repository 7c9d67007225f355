"""CART-style decision tree with Gini impurity and exhaustive threshold
search over midpoints of consecutive distinct feature values.

Trees are stored as flat arrays so batch prediction vectorizes and the
exporter can serialize nodes directly. All tie-breaks are deterministic:
features in ascending index order, thresholds in ascending value order,
leaf majorities at the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DtParams:
    feature: np.ndarray  # (m,) int16; -1 marks a leaf
    threshold: np.ndarray  # (m,) float64
    left: np.ndarray  # (m,) int32
    right: np.ndarray  # (m,) int32
    leaf_class: np.ndarray  # (m,) int16; -1 on internal nodes
    leaf_maj: np.ndarray  # (m,) int32 majority-class count at the leaf
    leaf_n: np.ndarray  # (m,) int32 training rows at the leaf

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_internal(self) -> int:
        return int(np.sum(self.feature >= 0))

    def equals(self, other: "DtParams") -> bool:
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("feature", "threshold", "left", "right", "leaf_class", "leaf_maj", "leaf_n")
        )


def _gini_curves(y_sorted: np.ndarray, n_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """Weighted Gini impurity of every prefix/suffix split of a sorted column.

    Returns (left_gini * n_left, right_gini * n_right) for split points
    after positions 1..n-1.
    """
    n = y_sorted.size
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y_sorted] = 1.0
    prefix = np.cumsum(onehot, axis=0)[:-1]  # counts left of each split
    totals = prefix[-1] + onehot[-1]
    n_left = np.arange(1, n)
    n_right = n - n_left
    suffix = totals - prefix
    left_term = n_left - np.sum(prefix**2, axis=1) / n_left
    right_term = n_right - np.sum(suffix**2, axis=1) / n_right
    return left_term, right_term


def _best_split(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    feature_ids: np.ndarray,
    min_leaf: int,
) -> tuple[int, float] | None:
    """Best (feature, threshold) over candidate features, or None."""
    n = y.size
    best_cost = np.inf
    best: tuple[int, float] | None = None
    for f in feature_ids:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        vs = col[order]
        if vs[0] == vs[-1]:
            continue
        left_term, right_term = _gini_curves(y[order], n_classes)
        cost = (left_term + right_term) / n
        # Valid split points: value must change and both sides >= min_leaf.
        k = np.arange(1, n)
        valid = (vs[1:] != vs[:-1]) & (k >= min_leaf) & (n - k >= min_leaf)
        if not valid.any():
            continue
        idx = np.flatnonzero(valid)
        j = idx[np.argmin(cost[idx])]
        if cost[j] < best_cost - 1e-12:
            best_cost = cost[j]
            best = (int(f), float((vs[j] + vs[j + 1]) / 2.0))
    return best


class _TreeBuilder:
    def __init__(self, n_classes: int, max_depth: int | None, min_leaf: int,
                 rng: np.random.Generator | None = None, n_feature_candidates: int | None = None):
        self.n_classes = n_classes
        self.max_depth = max_depth
        self.min_leaf = max(1, min_leaf)
        self.rng = rng
        self.n_feature_candidates = n_feature_candidates
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.leaf_class: list[int] = []
        self.leaf_maj: list[int] = []
        self.leaf_n: list[int] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.leaf_class.append(-1)
        self.leaf_maj.append(0)
        self.leaf_n.append(0)
        return len(self.feature) - 1

    def build(self, X: np.ndarray, y: np.ndarray) -> DtParams:
        self._grow(X, y, depth=0)
        return DtParams(
            feature=np.asarray(self.feature, dtype=np.int16),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            leaf_class=np.asarray(self.leaf_class, dtype=np.int16),
            leaf_maj=np.asarray(self.leaf_maj, dtype=np.int32),
            leaf_n=np.asarray(self.leaf_n, dtype=np.int32),
        )

    def _make_leaf(self, node: int, y: np.ndarray) -> None:
        counts = np.bincount(y, minlength=self.n_classes)
        cls = int(np.argmax(counts))  # ties resolve to the lowest class index
        self.leaf_class[node] = cls
        self.leaf_maj[node] = int(counts[cls])
        self.leaf_n[node] = int(y.size)

    def _candidate_features(self, p: int) -> np.ndarray:
        if self.n_feature_candidates is None or self.n_feature_candidates >= p:
            return np.arange(p)
        # Sorted subset keeps the ascending-feature tie-break deterministic
        # for a fixed rng stream.
        return np.sort(self.rng.choice(p, size=self.n_feature_candidates, replace=False))

    def _grow(self, X: np.ndarray, y: np.ndarray, depth: int) -> int:
        node = self._new_node()
        pure = y.size > 0 and np.all(y == y[0])
        depth_capped = self.max_depth is not None and depth >= self.max_depth
        if pure or depth_capped or y.size < 2 * self.min_leaf:
            self._make_leaf(node, y)
            return node
        split = _best_split(X, y, self.n_classes, self._candidate_features(X.shape[1]),
                            self.min_leaf)
        if split is None:
            self._make_leaf(node, y)
            return node
        f, thr = split
        go_left = X[:, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self._grow(X[go_left], y[go_left], depth + 1)
        self.right[node] = self._grow(X[~go_left], y[~go_left], depth + 1)
        return node


def train_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    max_depth: int | None = None,
    min_leaf: int = 1,
    rng: np.random.Generator | None = None,
    n_feature_candidates: int | None = None,
) -> DtParams:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    return _TreeBuilder(n_classes, max_depth, min_leaf, rng, n_feature_candidates).build(X, y)


def tree_apply(params: DtParams, X: np.ndarray) -> np.ndarray:
    """Leaf node index for each row (vectorized level-by-level routing)."""
    X = np.asarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        feat = params.feature[node]
        active = feat >= 0
        if not active.any():
            return node
        rows = np.flatnonzero(active)
        f = feat[rows].astype(np.int64)
        go_left = X[rows, f] <= params.threshold[node[rows]]
        node[rows] = np.where(go_left, params.left[node[rows]], params.right[node[rows]])


def tree_predict(params: DtParams, X: np.ndarray) -> np.ndarray:
    leaves = tree_apply(params, X)
    return params.leaf_class[leaves].astype(np.int64)


def tree_confidence(params: DtParams, X: np.ndarray) -> np.ndarray:
    """Majority fraction of the landing leaf, in [0, 1]."""
    leaves = tree_apply(params, X)
    n = np.maximum(params.leaf_n[leaves], 1)
    return params.leaf_maj[leaves] / n
