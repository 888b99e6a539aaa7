"""CART trees with Gini splits and a bootstrap random forest over them."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class ForestConfig:
    num_trees: int = 75
    min_samples_split: int = 2
    split_criterion: str = "gini"
    max_features: int | None = None  # None -> floor(sqrt(n_features))
    max_depth: int | None = None
    seed: int = 42

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.split_criterion != "gini":
            raise ValueError("only the gini criterion is supported")


def gini(counts: np.ndarray) -> np.ndarray:
    """Gini impurity along the last axis of a count array."""
    n = counts.sum(-1, keepdims=True)
    p = counts / np.where(n == 0, 1, n)
    return 1.0 - (p * p).sum(-1)


def best_split(X, y, n_classes, features):
    """Best (feature, threshold, weighted impurity) among ``features``; None if no split."""
    n = len(y)
    if n < 2:
        return None
    onehot = np.eye(n_classes)[y]
    total = onehot.sum(0)
    best = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = total - left
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        nl = np.arange(1, n)
        score = (nl * gini(left) + (n - nl) * gini(right)) / n
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))
        if best is None or score[i] < best[2]:
            thr = (xs[i] + xs[i + 1]) / 2.0
            if not thr < xs[i + 1]:  # midpoint rounded up onto the right value
                thr = xs[i]
            best = (int(f), float(thr), float(score[i]))
    return best


class DecisionTree:
    """Array-backed binary tree; leaves have ``feature == -1``."""

    def __init__(self):
        self.feature: list = []
        self.threshold: list = []
        self.left: list = []
        self.right: list = []
        self.value: list = []

    def _add(self, counts):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append([float(c) for c in counts / counts.sum()])
        return len(self.feature) - 1

    def fit(self, X, y, n_classes, rng, max_features, min_samples_split=2, max_depth=None):
        stack = [(np.arange(len(y)), 0, None, None)]
        while stack:
            idx, depth, parent, is_left = stack.pop()
            counts = np.bincount(y[idx], minlength=n_classes).astype(float)
            node = self._add(counts)
            if parent is not None:
                (self.left if is_left else self.right)[parent] = node
            if len(idx) < min_samples_split or (counts > 0).sum() == 1:
                continue
            if max_depth is not None and depth >= max_depth:
                continue
            feats = rng.choice(X.shape[1], size=min(max_features, X.shape[1]), replace=False)
            split = best_split(X[idx], y[idx], n_classes, np.sort(feats))
            if split is None or split[2] >= gini(counts):
                continue
            f, thr, _ = split
            self.feature[node] = f
            self.threshold[node] = thr
            mask = X[idx, f] <= thr
            # push right first so the left subtree gets the lower node ids
            stack.append((idx[~mask], depth + 1, node, False))
            stack.append((idx[mask], depth + 1, node, True))
        return self

    def leaf_index(self, X) -> np.ndarray:
        feat = np.array(self.feature)
        thr = np.array(self.threshold)
        left, right = np.array(self.left), np.array(self.right)
        node = np.zeros(len(X), dtype=np.int64)
        active = feat[node] >= 0
        while active.any():
            rows = np.nonzero(active)[0]
            n = node[rows]
            go_left = X[rows, feat[n]] <= thr[n]
            node[rows] = np.where(go_left, left[n], right[n])
            active = feat[node] >= 0
        return node

    def predict_proba(self, X) -> np.ndarray:
        return np.array(self.value)[self.leaf_index(X)]

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_json(cls, data) -> "DecisionTree":
        t = cls()
        for k in ("feature", "threshold", "left", "right", "value"):
            setattr(t, k, list(data[k]))
        return t


class RandomForest:
    def __init__(self, config: ForestConfig = ForestConfig()):
        self.config = config
        self.trees: list = []
        self.classes: list = []
        self.n_features = 0
        self.oob_accuracy: float | None = None

    def fit(self, X, y) -> "RandomForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.classes = sorted(set(y.tolist()))
        if len(self.classes) < 2:
            raise ValueError("training set has a single class; the forest needs both labels")
        yi = np.searchsorted(self.classes, y)
        n, self.n_features = X.shape
        k = len(self.classes)
        mf = self.config.max_features or max(1, int(math.isqrt(self.n_features)))
        votes = np.zeros((n, k))
        self.trees = []
        for i in range(self.config.num_trees):
            rng = np.random.default_rng(np.random.SeedSequence([self.config.seed, i]))
            boot = rng.integers(0, n, n)
            tree = DecisionTree().fit(X[boot], yi[boot], k, rng, mf,
                                      self.config.min_samples_split, self.config.max_depth)
            self.trees.append(tree)
            oob = np.setdiff1d(np.arange(n), boot)
            if len(oob):
                votes[oob, np.argmax(tree.predict_proba(X[oob]), axis=1)] += 1
        seen = votes.sum(1) > 0
        self.oob_accuracy = (float((np.argmax(votes[seen], 1) == yi[seen]).mean())
                             if seen.any() else None)
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def predict(self, X) -> np.ndarray:
        """Majority vote of the trees; ties go to the lower class."""
        X = np.asarray(X, dtype=float)
        votes = np.zeros((len(X), len(self.classes)))
        for t in self.trees:
            votes[np.arange(len(X)), np.argmax(t.predict_proba(X), axis=1)] += 1
        return np.array(self.classes)[np.argmax(votes, axis=1)]

    def positive_proba(self, X, positive=1) -> np.ndarray:
        return self.predict_proba(X)[:, self.classes.index(positive)]

    def to_json(self) -> dict:
        return {"config": asdict(self.config), "classes": self.classes,
                "n_features": self.n_features, "oob_accuracy": self.oob_accuracy,
                "trees": [t.to_json() for t in self.trees]}

    @classmethod
    def from_json(cls, data) -> "RandomForest":
        f = cls(ForestConfig(**data["config"]))
        f.classes = list(data["classes"])
        f.n_features = data["n_features"]
        f.oob_accuracy = data.get("oob_accuracy")
        f.trees = [DecisionTree.from_json(t) for t in data["trees"]]
        return f

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "RandomForest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))
