"""Random forest of axis-aligned Gini trees, built from scratch.

Trees are grown on bootstrap resamples with a random feature subset
considered at every split; candidate thresholds are midpoints between
consecutive distinct values, so every stored threshold lies strictly
inside the observed range of its feature within the node's subset. Leaves
keep the label fractions of their training subset; a tree votes its leaf
majority and the forest score is the fraction of trees voting 1.

Everything is deterministic given the forest seed: per-tree generators are
spawned from one seed sequence, so serial and threaded fits agree.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 2
    features_per_split: int | None = None  # None -> ceil(sqrt(n_features))

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ContractError(f"invalid forest config {self}")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ContractError(f"features_per_split must be >= 1, got {self.features_per_split}")

    def to_dict(self):
        return {"n_trees": self.n_trees, "max_depth": self.max_depth,
                "min_leaf": self.min_leaf, "features_per_split": self.features_per_split}


class TreeNode:
    """Internal node (feature, threshold, children) or leaf (fractions)."""

    __slots__ = ("feature", "threshold", "left", "right", "fraction_one", "count")

    def __init__(self, feature=-1, threshold=0.0, left=None, right=None,
                 fraction_one=0.0, count=0):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.fraction_one = fraction_one
        self.count = count

    @property
    def is_leaf(self):
        return self.left is None

    def to_dict(self):
        if self.is_leaf:
            return {"fractions": [1.0 - self.fraction_one, self.fraction_one],
                    "count": self.count}
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, doc):
        if "fractions" in doc:
            return cls(fraction_one=float(doc["fractions"][1]), count=int(doc["count"]))
        return cls(feature=int(doc["feature"]), threshold=float(doc["threshold"]),
                   left=cls.from_dict(doc["left"]), right=cls.from_dict(doc["right"]))


def _best_split(x, y, feature_ids, min_leaf):
    """Lowest-Gini split of (x, y) among the candidate features.

    Returns (feature, threshold) or None when no split separates the node
    while leaving min_leaf samples on each side.
    """
    n = y.size
    total_pos = int(y.sum())
    best = None  # (weighted gini, feature, threshold)
    for f in feature_ids:
        col = x[:, f]
        order = np.argsort(col, kind="stable")
        sorted_col = col[order]
        pos_prefix = np.cumsum(y[order])
        # split after position k puts k+1 samples left; valid only where the
        # value actually changes and both sides keep min_leaf samples
        k = np.arange(n - 1)
        valid = sorted_col[1:] > sorted_col[:-1]
        valid &= (k + 1 >= min_leaf) & (n - k - 1 >= min_leaf)
        if not valid.any():
            continue
        left_n = (k + 1).astype(np.float64)
        right_n = n - left_n
        left_pos = pos_prefix[:-1].astype(np.float64)
        right_pos = total_pos - left_pos
        p_l = left_pos / left_n
        p_r = right_pos / right_n
        gini = left_n * (2.0 * p_l * (1.0 - p_l)) + right_n * (2.0 * p_r * (1.0 - p_r))
        gini[~valid] = np.inf
        pick = int(np.argmin(gini))
        if best is None or gini[pick] < best[0]:
            threshold = 0.5 * (sorted_col[pick] + sorted_col[pick + 1])
            best = (float(gini[pick]), f, threshold)
    if best is None:
        return None
    return best[1], best[2]


def _grow(x, y, depth, cfg, mtry, rng):
    n = y.size
    pos = int(y.sum())
    node = TreeNode(fraction_one=pos / n, count=n)
    if depth >= cfg.max_depth or n < 2 * cfg.min_leaf or pos == 0 or pos == n:
        return node
    feature_ids = rng.choice(x.shape[1], size=min(mtry, x.shape[1]), replace=False)
    split = _best_split(x, y, feature_ids, cfg.min_leaf)
    if split is None:
        return node
    feature, threshold = split
    mask = x[:, feature] < threshold
    node.feature = int(feature)
    node.threshold = float(threshold)
    node.left = _grow(x[mask], y[mask], depth + 1, cfg, mtry, rng)
    node.right = _grow(x[~mask], y[~mask], depth + 1, cfg, mtry, rng)
    return node


def _tree_vote(root, row):
    node = root
    while not node.is_leaf:
        node = node.left if row[node.feature] < node.threshold else node.right
    return 1 if node.fraction_one >= 0.5 else 0


@dataclass
class RandomForest:
    trees: list
    cfg: ForestConfig
    seed: int
    n_features: int

    def score(self, row):
        """Fraction of trees voting 1; score * n_trees is the vote count."""
        votes = sum(_tree_vote(t, row) for t in self.trees)
        return votes / len(self.trees)

    def scores(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.array([self.score(row) for row in x])

    def predict(self, row):
        """1 iff the vote fraction reaches 0.5 (ties resolve to attack)."""
        return 1 if self.score(row) >= 0.5 else 0

    def predict_batch(self, x):
        return np.array([self.predict(row) for row in np.asarray(x, dtype=np.float64)],
                        dtype=np.int64)

    def to_dict(self):
        return {"cfg": self.cfg.to_dict(), "seed": self.seed, "n_features": self.n_features,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, doc):
        cfg = ForestConfig(**doc["cfg"])
        return cls(trees=[TreeNode.from_dict(t) for t in doc["trees"]], cfg=cfg,
                   seed=int(doc["seed"]), n_features=int(doc["n_features"]))


def _fit_one_tree(x, y, cfg, mtry, seed_seq):
    rng = np.random.default_rng(seed_seq)
    idx = rng.integers(0, y.size, size=y.size)  # bootstrap resample
    return _grow(x[idx], y[idx], 0, cfg, mtry, rng)


def fit_forest_arrays(x, y, cfg, seed, threads=1):
    """Fit on raw arrays; deterministic per-tree seeds spawned from ``seed``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ContractError(f"need a non-empty (n, features) array, got {x.shape}")
    if y.shape != (x.shape[0],):
        raise ContractError(f"labels shape {y.shape} does not match data {x.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ContractError("forest labels must be 0/1")
    mtry = cfg.features_per_split or math.ceil(math.sqrt(x.shape[1]))
    seqs = np.random.SeedSequence(seed).spawn(cfg.n_trees)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(lambda s: _fit_one_tree(x, y, cfg, mtry, s), seqs))
    else:
        trees = [_fit_one_tree(x, y, cfg, mtry, s) for s in seqs]
    return RandomForest(trees=trees, cfg=cfg, seed=seed, n_features=x.shape[1])


def fit_forest(samples, cfg, seed, threads=1):
    """Fit from DetectionSample records (features + 0/1 label each)."""
    if not samples:
        raise ContractError("cannot fit a forest on zero samples")
    x = np.stack([s.features for s in samples])
    y = np.array([s.label for s in samples], dtype=np.int64)
    return fit_forest_arrays(x, y, cfg, seed, threads=threads)
