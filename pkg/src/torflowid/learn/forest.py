"""Random forest of Gini decision trees with bootstrap sampling and hard voting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base import ClassifierModel, LabeledDataset, _check_trainable, register

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray      # LEAF for leaves
    threshold: np.ndarray    # go left when x <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray        # class code predicted at leaves

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            inner = feat != LEAF
            if not inner.any():
                break
            r, n, f = rows[inner], node[inner], feat[inner]
            go_left = X[r, f] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
        return self.value[node]

    @property
    def node_count(self) -> int:
        return len(self.feature)


def _best_split(Xn, yn, features, n_try, n_classes):
    """Best (feature, threshold) by weighted Gini over the candidate features.

    The first ``n_try`` features of ``features`` are always evaluated; if none
    of them can split the node, further candidates are tried one at a time
    until one can. Returns None when no feature separates the node.
    """
    n = len(yn)
    onehot = np.eye(n_classes)[yn]
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    best_score, best = math.inf, None
    for tried, f in enumerate(features):
        if tried >= n_try and best is not None:
            break
        col = Xn[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        valid = sv[:-1] < sv[1:]
        if not valid.any():
            continue
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = left[-1] + onehot[order[-1]] - left
        gini_l = 1.0 - (left ** 2).sum(axis=1) / n_left ** 2
        gini_r = 1.0 - (right ** 2).sum(axis=1) / n_right ** 2
        score = (n_left * gini_l + n_right * gini_r) / n
        score[~valid] = math.inf
        i = int(np.argmin(score))
        if score[i] < best_score:
            lo, hi = sv[i], sv[i + 1]
            thr = lo + (hi - lo) / 2
            if not lo <= thr < hi:
                thr = lo
            best_score, best = score[i], (int(f), float(thr))
    return best


def build_tree(X, y, n_classes, n_try, max_depth, rng) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)), 0)]
    d = X.shape[1]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        counts = np.bincount(yn, minlength=n_classes)
        value[node] = int(np.argmax(counts))
        if counts.max() == len(idx) or len(idx) < 2 or (max_depth is not None and depth >= max_depth):
            continue
        split = _best_split(X[idx], yn, rng.permutation(d), n_try, n_classes)
        if split is None:
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node], right[node] = new_node(), new_node()
        stack.append((right[node], idx[~mask], depth + 1))
        stack.append((left[node], idx[mask], depth + 1))

    return Tree(np.array(feature, dtype=np.intp), np.array(threshold, dtype=float),
                np.array(left, dtype=np.intp), np.array(right, dtype=np.intp),
                np.array(value, dtype=np.intp))


@register
@dataclass
class ForestModel(ClassifierModel):
    kind = "random_forest"
    display_name = "Random Forest"

    trees: list = field(default_factory=list, repr=False)

    def votes(self, X) -> np.ndarray:
        """Per-class vote counts, shape (n, n_classes); each row sums to the tree count."""
        X = np.asarray(X, dtype=float)
        out = np.zeros((len(X), len(self.classes)), dtype=np.intp)
        rows = np.arange(len(X))
        for tree in self.trees:
            np.add.at(out, (rows, tree.apply(X)), 1)
        return out

    def _predict_codes(self, X):
        # argmax picks the earliest class on ties
        return np.argmax(self.votes(X), axis=1)

    def _state(self):
        sizes = np.array([t.node_count for t in self.trees], dtype=np.intp)
        cat = lambda name: np.concatenate([getattr(t, name) for t in self.trees])
        return {"sizes": sizes, "feature": cat("feature"), "threshold": cat("threshold"),
                "left": cat("left"), "right": cat("right"), "value": cat("value")}

    @classmethod
    def _from_state(cls, meta, arrays):
        bounds = np.concatenate(([0], np.cumsum(arrays["sizes"])))
        trees = [
            Tree(*(arrays[k][a:b] for k in ("feature", "threshold", "left", "right", "value")))
            for a, b in zip(bounds[:-1], bounds[1:])
        ]
        return cls(tuple(meta["classes"]), meta["params"], meta["seed"], meta["scaler_id"],
                   meta["n_features"], trees)


def train_random_forest(dataset: LabeledDataset, trees: int = 100, max_depth: int | None = None,
                        seed: int = 0, scaler_id: str = "") -> ForestModel:
    _check_trainable(dataset)
    if trees < 1:
        raise ValueError("need at least one tree")
    X, y = dataset.X, dataset.codes
    n, d = X.shape
    n_try = max(1, math.isqrt(d))
    built = []
    for child in np.random.SeedSequence(seed).spawn(trees):
        rng = np.random.default_rng(child)
        boot = rng.integers(0, n, size=n)
        built.append(build_tree(X[boot], y[boot], len(dataset.classes), n_try, max_depth, rng))
    params = {"trees": int(trees), "max_depth": max_depth, "max_features": n_try}
    return ForestModel(dataset.classes, params, int(seed), scaler_id, d, built)
