"""Random forest: bagged Gini trees with per-node feature subsampling.

Each tree draws its bootstrap sample and feature subsets from its own
child generator spawned off the forest seed, so a fixed seed reproduces
the forest tree-for-tree regardless of parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tree import DtParams, tree_apply, train_tree


@dataclass
class RfParams:
    trees: list[DtParams]

    def equals(self, other: "RfParams") -> bool:
        return len(self.trees) == len(other.trees) and all(
            a.equals(b) for a, b in zip(self.trees, other.trees)
        )


def train_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    n_trees: int = 100,
    max_depth: int | None = 12,
    min_leaf: int = 1,
    feature_subsample: int | None = None,
    seed: int = 0,
) -> RfParams:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    if feature_subsample is None:
        feature_subsample = max(1, int(np.sqrt(X.shape[1])))
    children = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for ss in children:
        rng = np.random.default_rng(ss)
        boot = rng.integers(0, n, size=n)
        trees.append(
            train_tree(
                X[boot],
                y[boot],
                n_classes,
                max_depth=max_depth,
                min_leaf=min_leaf,
                rng=rng,
                n_feature_candidates=feature_subsample,
            )
        )
    return RfParams(trees=trees)


def forest_votes(params: RfParams, X: np.ndarray, n_classes: int) -> np.ndarray:
    """(n, n_classes) vote counts across trees."""
    X = np.asarray(X, dtype=np.float64)
    votes = np.zeros((X.shape[0], n_classes), dtype=np.int64)
    for tree in params.trees:
        pred = tree.leaf_class[tree_apply(tree, X)]
        votes[np.arange(X.shape[0]), pred] += 1
    return votes


def forest_predict(params: RfParams, X: np.ndarray, n_classes: int) -> np.ndarray:
    return np.argmax(forest_votes(params, X, n_classes), axis=1)


def forest_confidence(params: RfParams, X: np.ndarray, n_classes: int) -> np.ndarray:
    """Winning vote fraction per row."""
    votes = forest_votes(params, X, n_classes)
    return votes.max(axis=1) / max(len(params.trees), 1)
