"""Random forest classifier on traffic matrix feature vectors.

Plain CART-style trees: greedy Gini splits with midpoint thresholds
between consecutive distinct sorted feature values, grown to purity
unless max_depth or min_samples_leaf stops them, majority vote across
trees with ties resolved toward the smaller class id.  Each tree draws
a bootstrap of the training set and a fresh feature subset per node
from its own rng stream, so a fit is reproducible tree by tree and
independent of how many worker threads are used.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import STREAM_TREE, ConfigError, DataError, stream_rng


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None  # None grows to purity
    min_samples_leaf: int = 1
    features_per_split: int | None = None  # None -> ceil(sqrt(n_features))

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1 or None")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ConfigError("features_per_split must be >= 1 or None")


@dataclass
class DecisionTree:
    feature: np.ndarray  # int32, -1 marks a leaf
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    counts: np.ndarray  # (n_nodes, n_classes) int64 training counts

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    config: ForestConfig
    n_classes: int
    n_features: int


def gini_impurity(counts: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n <= 0:
        raise DataError("cannot compute impurity of an empty node")
    frac = counts / n
    return float(1.0 - np.sum(frac * frac))


def _best_split(X: np.ndarray, onehot: np.ndarray, idx: np.ndarray,
                features: np.ndarray, min_leaf: int):
    """Best (feature, threshold) by weighted child Gini; None if no valid cut.

    Ties keep the earliest feature in `features` order and the smallest
    threshold within a feature.
    """
    m = len(idx)
    best = None
    best_score = np.inf
    for f in features:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        cum = np.cumsum(onehot[idx][order], axis=0)
        total = cum[-1]
        cut = np.nonzero(sv[:-1] < sv[1:])[0]  # split between i and i+1
        if cut.size == 0:
            continue
        left_n = cut + 1
        right_n = m - left_n
        valid = (left_n >= min_leaf) & (right_n >= min_leaf)
        cut = cut[valid]
        if cut.size == 0:
            continue
        left_n = left_n[valid].astype(np.float64)
        right_n = right_n[valid].astype(np.float64)
        lc = cum[cut].astype(np.float64)
        rc = total.astype(np.float64) - lc
        gl = 1.0 - np.sum((lc / left_n[:, None]) ** 2, axis=1)
        gr = 1.0 - np.sum((rc / right_n[:, None]) ** 2, axis=1)
        score = (left_n * gl + right_n * gr) / m
        j = int(np.argmin(score))
        if score[j] < best_score:
            best_score = float(score[j])
            thr = (sv[cut[j]] + sv[cut[j] + 1]) / 2.0
            best = (int(f), float(thr))
    return best


def build_tree(X: np.ndarray, y: np.ndarray, n_classes: int,
               config: ForestConfig, rng: np.random.Generator) -> DecisionTree:
    n, n_features = X.shape
    mtry = config.features_per_split or math.ceil(math.sqrt(n_features))
    mtry = min(mtry, n_features)
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), y] = 1

    feat_l: list[int] = []
    thr_l: list[float] = []
    left_l: list[int] = []
    right_l: list[int] = []
    counts_l: list[np.ndarray] = []

    # explicit stack instead of recursion: trees grown to purity can get
    # deeper than the interpreter's recursion limit
    stack = [(np.arange(n), 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        node_id = len(feat_l)
        counts = onehot[idx].sum(axis=0)
        feat_l.append(-1)
        thr_l.append(0.0)
        left_l.append(-1)
        right_l.append(-1)
        counts_l.append(counts)
        if parent >= 0:
            if is_left:
                left_l[parent] = node_id
            else:
                right_l[parent] = node_id
        if np.count_nonzero(counts) <= 1:
            continue  # pure
        if config.max_depth is not None and depth >= config.max_depth:
            continue
        if len(idx) < 2 * config.min_samples_leaf:
            continue
        features = rng.choice(X.shape[1], size=mtry, replace=False)
        found = _best_split(X, onehot, idx, features, config.min_samples_leaf)
        if found is None:
            continue
        f, thr = found
        feat_l[node_id] = f
        thr_l[node_id] = thr
        go_left = X[idx, f] < thr
        stack.append((idx[~go_left], depth + 1, node_id, False))
        stack.append((idx[go_left], depth + 1, node_id, True))

    return DecisionTree(
        feature=np.array(feat_l, dtype=np.int32),
        threshold=np.array(thr_l, dtype=np.float64),
        left=np.array(left_l, dtype=np.int32),
        right=np.array(right_l, dtype=np.int32),
        counts=np.array(counts_l, dtype=np.int64),
    )


def tree_apply(tree: DecisionTree, X: np.ndarray) -> np.ndarray:
    """Leaf node index for every row."""
    pos = np.zeros(len(X), dtype=np.int64)
    while True:
        feats = tree.feature[pos]
        active = feats >= 0
        if not active.any():
            return pos
        rows = np.nonzero(active)[0]
        f = feats[rows]
        go_left = X[rows, f] < tree.threshold[pos[rows]]
        pos[rows] = np.where(go_left, tree.left[pos[rows]],
                             tree.right[pos[rows]])


def forest_fit(X: np.ndarray, y: np.ndarray, n_classes: int,
               config: ForestConfig | None = None, seed: int = 0,
               threads: int = 1) -> ForestModel:
    """Fit n_trees bootstrapped trees; tree t uses rng stream (seed, t).

    The thread count only controls the worker pool; results are
    byte-identical for any value.
    """
    config = config or ForestConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y) or len(X) == 0:
        raise DataError(
            f"need matching non-empty X (n, f) and y (n), got "
            f"{X.shape} and {y.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise DataError("features must be finite")
    if np.any(y < 0) or np.any(y >= n_classes):
        raise DataError(f"labels must be in [0, {n_classes})")
    if len(np.unique(y)) < 2:
        raise DataError("need at least two classes present to fit")

    def one_tree(t: int) -> DecisionTree:
        rng = stream_rng(seed, STREAM_TREE, t)
        boot = rng.integers(0, len(X), size=len(X))
        return build_tree(X[boot], y[boot], n_classes, config, rng)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(one_tree, range(config.n_trees)))
    else:
        trees = [one_tree(t) for t in range(config.n_trees)]
    return ForestModel(trees, config, n_classes, X.shape[1])


def forest_predict(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Majority vote over per-tree argmax leaves; ties -> smaller class id."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(
            f"expected (n, {model.n_features}) features, got {X.shape}")
    votes = np.zeros((len(X), model.n_classes), dtype=np.int64)
    for tree in model.trees:
        leaves = tree_apply(tree, X)
        picks = np.argmax(tree.counts[leaves], axis=1)
        votes[np.arange(len(X)), picks] += 1
    return np.argmax(votes, axis=1)
