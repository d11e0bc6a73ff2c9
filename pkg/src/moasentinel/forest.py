"""Fault-type classification with an AUC-weighted random forest.

CART trees grow on bootstrap samples with a fresh random feature subset
at every node and Gini impurity as the split criterion. Each tree is
scored on its out-of-bag rows with a macro-averaged one-vs-rest AUC
(Mann-Whitney rank form, midranks for ties); the normalized AUCs become
the trees' voting weights. Prediction averages leaf class proportions
under those weights and takes the argmax, ties broken by class order
(Normal < Aging < Damp < Surface < Other).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata
from sklearn.base import BaseEstimator, ClassifierMixin

from . import persist
from ._validation import as_feature_matrix, check_fitted, check_seed
from .data import CLASS_ORDER, N_CLASSES, FEATURE_NAMES, FaultClass
from .errors import DataFormatError

FOREST_FORMAT = "forest/1"
N_FEATURES = len(FEATURE_NAMES)


def gini(histogram) -> float:
    """Gini impurity 1 - sum(p_k^2) of a class-count histogram."""
    counts = np.asarray(histogram, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise DataFormatError("gini needs a histogram with positive total count")
    p = counts / total
    return float(1.0 - np.dot(p, p))


def best_split(X, y, feature_indices, min_leaf: int = 1):
    """Best (feature, threshold, gain) among midpoints of the candidate features.

    Thresholds are midpoints between consecutive distinct sorted values;
    rows with value <= threshold go left. Splits leaving either side
    below min_leaf are discarded. Returns None when no candidate split
    has strictly positive Gini gain. The first feature (in the order
    given) attaining the maximum wins, which keeps tree growth
    deterministic for a fixed feature draw.
    """
    n = y.size
    parent_counts = np.bincount(y, minlength=N_CLASSES)
    parent_gini = gini(parent_counts)
    best = None  # (gain, feature, threshold)
    for feature in feature_indices:
        column = X[:, feature]
        order = np.argsort(column, kind="stable")
        sval = column[order]
        slab = y[order]
        boundaries = np.flatnonzero(sval[1:] > sval[:-1])  # split after index b
        if boundaries.size == 0:
            continue
        onehot = np.zeros((n, N_CLASSES))
        onehot[np.arange(n), slab] = 1.0
        left_counts = np.cumsum(onehot, axis=0)[boundaries]
        n_left = boundaries + 1.0
        n_right = n - n_left
        keep = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not np.any(keep):
            continue
        left_counts = left_counts[keep]
        n_left = n_left[keep]
        n_right = n_right[keep]
        thresholds = (sval[boundaries[keep]] + sval[boundaries[keep] + 1]) / 2.0
        right_counts = parent_counts - left_counts
        gini_left = 1.0 - np.sum((left_counts / n_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((right_counts / n_right[:, None]) ** 2, axis=1)
        gains = parent_gini - (n_left * gini_left + n_right * gini_right) / n
        pick = int(np.argmax(gains))
        if gains[pick] <= 0:
            continue
        if best is None or gains[pick] > best[0]:
            best = (float(gains[pick]), int(feature), float(thresholds[pick]))
    if best is None:
        return None
    return best[1], best[2], best[0]


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (class histogram)."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    counts: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.counts is not None


@dataclass
class DecisionTree:
    root: TreeNode
    # cached per-leaf proportions are built lazily on first predict

    def leaf_proportions(self, x: np.ndarray) -> np.ndarray:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.counts / node.counts.sum()

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.vstack([self.leaf_proportions(row) for row in X])


def train_tree(X, y, max_depth, min_leaf_size, max_features, rng):
    """Grow one CART tree; stops at depth, leaf size, or purity."""

    def grow(rows, depth):
        counts = np.bincount(y[rows], minlength=N_CLASSES)
        if (
            depth >= max_depth
            or rows.size < 2 * min_leaf_size
            or np.count_nonzero(counts) <= 1
        ):
            return TreeNode(counts=counts.astype(float))
        features = rng.choice(N_FEATURES, size=max_features, replace=False)
        split = best_split(X[rows], y[rows], features, min_leaf=min_leaf_size)
        if split is None:
            return TreeNode(counts=counts.astype(float))
        feature, threshold, _ = split
        mask = X[rows, feature] <= threshold
        return TreeNode(
            feature=feature,
            threshold=threshold,
            left=grow(rows[mask], depth + 1),
            right=grow(rows[~mask], depth + 1),
        )

    root = grow(np.arange(y.size), 0)
    return DecisionTree(root=root)


def bootstrap_tree(X, y, max_depth, min_leaf_size, max_features, rng):
    """Draw a size-N bootstrap, grow a tree on it, return (tree, oob indices)."""
    n = y.size
    sample = rng.integers(0, n, size=n)
    oob = np.setdiff1d(np.arange(n), sample)
    tree = train_tree(X[sample], y[sample], max_depth, min_leaf_size, max_features, rng)
    return tree, oob


def binary_auc(scores, positives) -> float:
    """Mann-Whitney AUC with midranks; positives is a boolean mask."""
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataFormatError("AUC needs both positive and negative examples")
    ranks = rankdata(scores, method="average")
    rank_sum = float(ranks[positives].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def tree_auc(tree: DecisionTree, X_oob, y_oob) -> float | None:
    """Macro-average one-vs-rest AUC of a tree on its out-of-bag rows.

    The score for class k is the tree's leaf proportion of class k.
    Classes missing a positive or negative example are skipped; if no
    class is scorable the result is None (degenerate OOB set).
    """
    if y_oob.size == 0:
        return None
    proba = tree.predict_proba(X_oob)
    per_class = []
    for k in range(N_CLASSES):
        positives = y_oob == k
        if positives.all() or not positives.any():
            continue
        per_class.append(binary_auc(proba[:, k], positives))
    if not per_class:
        return None
    return float(np.mean(per_class))


@dataclass
class FaultPrediction:
    """Class probability vector with its argmax label."""

    probabilities: np.ndarray
    label: FaultClass
    tree_votes: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "label": self.label.value,
            "probabilities": {
                cls.value: float(p) for cls, p in zip(CLASS_ORDER, self.probabilities)
            },
        }


class AucWeightedForestClassifier(ClassifierMixin, BaseEstimator):
    """Random forest whose trees vote proportionally to their OOB AUC.

    Bootstrap and feature-subset randomness for tree j comes from an RNG
    stream derived from (seed, j), so training is reproducible and
    order-independent. A tree whose OOB set cannot be scored receives
    the mean AUC of the scorable trees before normalization.
    """

    def __init__(
        self,
        n_trees: int = 100,
        max_depth: int = 12,
        min_leaf_size: int = 2,
        max_features: int = 3,
        seed: int = 0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf_size = min_leaf_size
        self.max_features = max_features
        self.seed = seed
        self.trees_: list[DecisionTree] | None = None
        self.weights_: np.ndarray | None = None
        self.oob_auc_mean_: float | None = None
        self.classes_ = np.arange(N_CLASSES)

    def fit(self, X, y):
        X = as_feature_matrix(X, N_FEATURES)
        y = np.asarray(y, dtype=np.intp)
        if y.ndim != 1 or y.size != X.shape[0]:
            raise DataFormatError("labels must be one integer per row")
        if y.min() < 0 or y.max() >= N_CLASSES:
            raise DataFormatError(f"labels must lie in [0, {N_CLASSES})")
        if np.unique(y).size < 2:
            raise DataFormatError("training data must contain at least 2 classes")
        if self.n_trees < 1:
            raise DataFormatError("n_trees must be >= 1")
        if not 1 <= self.max_features <= N_FEATURES:
            raise DataFormatError(f"max_features must lie in [1, {N_FEATURES}]")
        seed = check_seed(self.seed)

        trees: list[DecisionTree] = []
        aucs: list[float | None] = []
        for j in range(self.n_trees):
            rng = np.random.default_rng([seed, j])
            tree, oob = bootstrap_tree(
                X, y, self.max_depth, self.min_leaf_size, self.max_features, rng
            )
            trees.append(tree)
            aucs.append(tree_auc(tree, X[oob], y[oob]))

        scored = [a for a in aucs if a is not None]
        fallback = float(np.mean(scored)) if scored else 0.5
        raw = np.array([a if a is not None else fallback for a in aucs])
        if raw.sum() <= 0:  # every tree anti-ranked its OOB rows
            raw = np.ones(self.n_trees)
        self.weights_ = raw / raw.sum()
        self.trees_ = trees
        self.oob_auc_mean_ = fallback if scored else None
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_fitted(self, "trees_")
        X = as_feature_matrix(X, N_FEATURES)
        out = np.zeros((X.shape[0], N_CLASSES))
        for weight, tree in zip(self.weights_, self.trees_):
            out += weight * tree.predict_proba(X)
        return out

    def predict(self, X) -> np.ndarray:
        # np.argmax returns the first maximum, which matches the class-order
        # tie-break.
        return np.argmax(self.predict_proba(X), axis=1)

    def predict_one(self, x, with_votes: bool = False) -> FaultPrediction:
        check_fitted(self, "trees_")
        x = as_feature_matrix(x, N_FEATURES)
        votes = np.vstack([tree.predict_proba(x)[0] for tree in self.trees_])
        probabilities = self.weights_ @ votes
        label = CLASS_ORDER[int(np.argmax(probabilities))]
        return FaultPrediction(
            probabilities=probabilities,
            label=label,
            tree_votes=votes if with_votes else None,
        )

    # -- persistence ----------------------------------------------------

    def save(self, path) -> None:
        check_fitted(self, "trees_")

        def encode(node: TreeNode):
            if node.is_leaf:
                return {"counts": node.counts.tolist()}
            return {
                "feature": node.feature,
                "threshold": node.threshold,
                "left": encode(node.left),
                "right": encode(node.right),
            }

        doc = {
            "format": FOREST_FORMAT,
            "config": {
                "n_trees": self.n_trees,
                "max_depth": self.max_depth,
                "min_leaf_size": self.min_leaf_size,
                "max_features": self.max_features,
                "seed": self.seed,
            },
            "classes": [cls.value for cls in CLASS_ORDER],
            "weights": self.weights_.tolist(),
            "oob_auc_mean": self.oob_auc_mean_,
            "trees": [encode(tree.root) for tree in self.trees_],
        }
        persist.write_document(doc, path)

    @classmethod
    def load(cls, path) -> "AucWeightedForestClassifier":
        doc = persist.read_document(path, FOREST_FORMAT)
        model = cls(**doc["config"])
        if doc.get("classes") != [c.value for c in CLASS_ORDER]:
            raise DataFormatError("stored class catalog does not match this package")

        def decode(obj) -> TreeNode:
            if "counts" in obj:
                counts = np.asarray(obj["counts"], dtype=float)
                if counts.shape != (N_CLASSES,) or counts.sum() <= 0:
                    raise DataFormatError("leaf histogram malformed")
                return TreeNode(counts=counts)
            return TreeNode(
                feature=int(obj["feature"]),
                threshold=float(obj["threshold"]),
                left=decode(obj["left"]),
                right=decode(obj["right"]),
            )

        model.trees_ = [DecisionTree(root=decode(t)) for t in doc["trees"]]
        weights = np.asarray(doc["weights"], dtype=float)
        if weights.shape != (len(model.trees_),) or abs(weights.sum() - 1.0) > 1e-9:
            raise DataFormatError("tree weights malformed or unnormalized")
        model.weights_ = weights
        model.oob_auc_mean_ = doc.get("oob_auc_mean")
        return model
