"""CART decision trees, bagged forest, standardizer, stratified K-fold.

Trees grow on Gini impurity with one randomly drawn candidate feature per
node (falling back to the remaining features when the drawn one is constant
within the node, so separable data is always grown to purity). Leaves hold
a majority vote with ties going to class 1. The forest averages the T tree
votes; the decision threshold maps 0.5 exactly to class 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from deepagent.errors import UsageError


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    vote: int = -1  # leaf class when >= 0

    @property
    def is_leaf(self) -> bool:
        return self.vote >= 0


@dataclass
class DecisionTree:
    root: TreeNode
    seed: int = 0

    def predict_one(self, x: np.ndarray) -> int:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.vote

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(x) for x in np.atleast_2d(X)], dtype=int)


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return 1.0 - float((p * p).sum())


def _majority(y: np.ndarray) -> int:
    ones = int(y.sum())
    return 1 if ones >= len(y) - ones else 0


def _grow(X: np.ndarray, y: np.ndarray, idx: np.ndarray,
          rng: np.random.Generator) -> TreeNode:
    ys = y[idx]
    if len(idx) < 2 or ys.min() == ys.max():
        return TreeNode(vote=_majority(ys))
    # mtry = 1: one uniformly drawn candidate feature; if it is constant
    # within the node, fall through to the remaining features in drawn order
    order = rng.permutation(X.shape[1])
    for f in order:
        vals = np.unique(X[idx, f])
        if len(vals) < 2:
            continue
        thresholds = (vals[:-1] + vals[1:]) / 2.0
        col = X[idx, f]
        best_cost, best_thr = np.inf, None
        for thr in thresholds:
            left = col <= thr
            n_left = int(left.sum())
            n_right = len(idx) - n_left
            if n_left == 0 or n_right == 0:
                continue
            cl = np.bincount(ys[left], minlength=2)
            cr = np.bincount(ys[~left], minlength=2)
            cost = (n_left * _gini(cl) + n_right * _gini(cr)) / len(idx)
            if cost < best_cost:
                best_cost, best_thr = cost, thr
        if best_thr is None:
            continue
        mask = X[idx, f] <= best_thr
        node = TreeNode(feature=int(f), threshold=float(best_thr))
        node.left = _grow(X, y, idx[mask], rng)
        node.right = _grow(X, y, idx[~mask], rng)
        return node
    # every feature constant within the node but labels mixed
    return TreeNode(vote=_majority(ys))


def train_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator,
               seed: int = 0) -> DecisionTree:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    if len(X) < 1:
        raise UsageError("cannot train a tree on an empty set")
    root = _grow(X, y, np.arange(len(X)), rng)
    return DecisionTree(root, seed)


@dataclass
class Standardizer:
    mu: np.ndarray
    sigma: np.ndarray

    def apply(self, Z: np.ndarray) -> np.ndarray:
        return (np.asarray(Z, dtype=float) - self.mu) / self.sigma


def fit_standardizer(Z: np.ndarray) -> Standardizer:
    """Per-column population mean/std; constant columns get sigma 1."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if len(Z) == 0:
        raise UsageError("cannot fit a standardizer on an empty set")
    mu = Z.mean(axis=0)
    sigma = Z.std(axis=0)
    sigma = np.where(sigma == 0.0, 1.0, sigma)
    return Standardizer(mu, sigma)


def apply_standardizer(std: Standardizer, z: np.ndarray) -> np.ndarray:
    return std.apply(z)


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    seeds: list[int]
    standardizer: Standardizer
    n_trees: int = field(default=0)

    def __post_init__(self):
        if self.n_trees == 0:
            self.n_trees = len(self.trees)


def train_forest(Z: np.ndarray, y: np.ndarray, n_trees: int = 100,
                 seed: int = 0, bootstrap: bool = True) -> ForestModel:
    """Fit the standardizer on Z, then bag ``n_trees`` CART trees.

    Each tree gets its own rng (derived from ``seed``) for the bootstrap
    draw and for the per-node feature choices.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    y = np.asarray(y, dtype=int)
    if len(np.unique(y)) < 2:
        raise UsageError("forest training needs both classes present")
    std = fit_standardizer(Z)
    Zs = std.apply(Z)
    n = len(Zs)
    trees, seeds = [], []
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
        if bootstrap:
            idx = rng.integers(0, n, size=n)
        else:
            idx = np.arange(n)
        trees.append(train_tree(Zs[idx], y[idx], rng, seed=t))
        seeds.append(t)
    return ForestModel(trees, seeds, std, n_trees)


def predict_forest(model: ForestModel, z: np.ndarray) -> tuple[float, int]:
    """(vote-fraction probability, label); label is 1 iff probability >= 0.5."""
    if not model.trees:
        raise UsageError("forest has no trained trees")
    zs = model.standardizer.apply(np.atleast_2d(z))[0]
    votes = sum(tree.predict_one(zs) for tree in model.trees)
    prob = votes / model.n_trees
    return prob, int(prob >= 0.5)


def predict_forest_batch(model: ForestModel, Z: np.ndarray):
    probs = np.empty(len(Z))
    labels = np.empty(len(Z), dtype=int)
    for i, z in enumerate(np.atleast_2d(Z)):
        probs[i], labels[i] = predict_forest(model, z)
    return probs, labels


def stratified_kfold(labels, k: int = 5, seed: int = 0):
    """K disjoint (train, validation) index partitions preserving class mix.

    Within each class the indices are shuffled and chunked; chunk sizes
    differ by at most one, so each fold's class count is within one sample
    of the exact proportion.
    """
    y = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5F01D]))
    per_class_chunks: list[list[np.ndarray]] = []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if len(idx) < k:
            raise UsageError(
                f"class {c} has {len(idx)} samples, needs >= {k} for {k}-fold CV")
        idx = rng.permutation(idx)
        base, rem = divmod(len(idx), k)
        chunks, start = [], 0
        for f in range(k):
            size = base + (1 if f < rem else 0)
            chunks.append(idx[start:start + size])
            start += size
        per_class_chunks.append(chunks)
    folds = []
    all_idx = np.arange(len(y))
    for f in range(k):
        val = np.sort(np.concatenate([chunks[f] for chunks in per_class_chunks]))
        mask = np.ones(len(y), dtype=bool)
        mask[val] = False
        folds.append((all_idx[mask], val))
    return folds
