"""Random forest (CART) for classification and regression, built natively.

Split search is vectorized with prefix sums over sorted columns.  Every
stochastic choice (bootstrap, per-node feature subsets) comes from a stream
derived from (seed, tree index), so any training order or parallelism yields
the same forest.  Ties break toward the lower feature index and threshold.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import NoSplitsWarning

_EPS = 1e-12


@dataclass
class ForestHyperParams:
    n_trees: int = 100
    max_depth: int | None = None
    max_features: float | str = "sqrt"
    min_samples_split: int = 2
    criterion: str = "gini"  # gini | entropy (classification), variance (regression)
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if isinstance(self.max_features, float) and not 0 < self.max_features <= 1:
            raise ValueError("fractional max_features must be in (0, 1]")

    def to_dict(self) -> dict:
        return {"n_trees": self.n_trees, "max_depth": self.max_depth,
                "max_features": self.max_features,
                "min_samples_split": self.min_samples_split,
                "criterion": self.criterion, "seed": self.seed}


def _m_features(max_features, d: int) -> int:
    if max_features == "sqrt":
        return max(1, int(math.sqrt(d)))
    return max(1, int(round(float(max_features) * d)))


def _class_impurity(counts: np.ndarray, criterion: str) -> np.ndarray:
    """Impurity per row of weighted class counts."""
    total = counts.sum(axis=-1, keepdims=True)
    p = counts / np.maximum(total, _EPS)
    if criterion == "gini":
        return 1.0 - (p * p).sum(axis=-1)
    logs = np.where(p > 0, np.log2(np.maximum(p, _EPS)), 0.0)
    return -(p * logs).sum(axis=-1)


class _Tree:
    """Flat-array CART tree."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "importance")

    def __init__(self, n_features: int):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray | float] = []
        self.importance = np.zeros(n_features)

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(None)
        return len(self.feature) - 1

    def apply(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(X.shape[0], dtype=np.int64)
        active = np.arange(X.shape[0])
        feature = np.asarray(self.feature)
        thresh = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        while active.size:
            nodes = idx[active]
            leafy = feature[nodes] < 0
            active = active[~leafy]
            if not active.size:
                break
            nodes = idx[active]
            go_left = X[active, feature[nodes]] < thresh[nodes]
            idx[active] = np.where(go_left, left[nodes], right[nodes])
        return idx


def _best_split(X, y, w, idx, feats, criterion, n_classes):
    """Best (feature, threshold, gain) over the candidate features.

    Returns None when no feature admits a valid split.  Classification uses
    weighted class-count prefix sums; regression uses weighted moment sums.
    """
    n = idx.size
    best = None  # (impurity_after, feature, threshold, left_mask_order)
    classify = n_classes is not None
    yv = y[idx]
    wv = w[idx]
    w_total = wv.sum()
    for f in feats:
        col = X[idx, f]
        order = np.argsort(col, kind="stable")
        cs = col[order]
        valid = cs[:-1] < cs[1:]
        if not valid.any():
            continue
        ws = wv[order]
        if classify:
            onehot = np.zeros((n, n_classes))
            onehot[np.arange(n), yv[order]] = ws
            cum = onehot.cumsum(axis=0)[:-1]
            wl = cum.sum(axis=1)
            wr = w_total - wl
            imp_l = _class_impurity(cum, criterion)
            imp_r = _class_impurity(cum[-1][None, :] + onehot[-1] - cum, criterion)
        else:
            ys = yv[order] * ws
            y2s = yv[order] ** 2 * ws
            cw = ws.cumsum()[:-1]
            cy = ys.cumsum()[:-1]
            cy2 = y2s.cumsum()[:-1]
            wl, wr = cw, w_total - cw
            mean_l = cy / np.maximum(wl, _EPS)
            mean_r = (cy[-1] + ys[-1] - cy) / np.maximum(wr, _EPS)
            imp_l = cy2 / np.maximum(wl, _EPS) - mean_l ** 2
            imp_r = (cy2[-1] + y2s[-1] - cy2) / np.maximum(wr, _EPS) - mean_r ** 2
        after = (wl * imp_l + wr * imp_r) / w_total
        after = np.where(valid, after, np.inf)
        pos = int(np.argmin(after))
        if not np.isfinite(after[pos]):
            continue
        if best is None or after[pos] < best[0] - _EPS:
            thr = (cs[pos] + cs[pos + 1]) / 2.0
            best = (float(after[pos]), f, thr, order[: pos + 1])
    return best


def _grow(tree: _Tree, X, y, w, idx, depth, hp, n_classes, rng, w_all):
    node = tree.add_node()
    classify = n_classes is not None
    wv = w[idx]
    w_node = wv.sum()
    if classify:
        counts = np.bincount(y[idx], weights=wv, minlength=n_classes)
        tree.value[node] = counts / max(counts.sum(), _EPS)
        impurity = float(_class_impurity(counts[None, :], hp.criterion)[0])
    else:
        mean = float(np.average(y[idx], weights=wv))
        tree.value[node] = mean
        impurity = float(np.average((y[idx] - mean) ** 2, weights=wv))

    if (idx.size < hp.min_samples_split or impurity <= _EPS
            or (hp.max_depth is not None and depth >= hp.max_depth)):
        return node

    d = X.shape[1]
    m = _m_features(hp.max_features, d)
    feats = np.sort(rng.choice(d, size=m, replace=False))
    split = _best_split(X, y, w, idx, feats, hp.criterion, n_classes)
    if split is None:
        return node
    after, f, thr, left_order = split
    gain = impurity - after
    if gain <= _EPS:
        return node
    tree.importance[f] += (w_node / w_all) * gain
    left_idx = idx[left_order]
    right_idx = idx[np.setdiff1d(np.arange(idx.size), left_order, assume_unique=True)]
    tree.feature[node] = int(f)
    tree.threshold[node] = float(thr)
    tree.left[node] = _grow(tree, X, y, w, left_idx, depth + 1, hp, n_classes, rng, w_all)
    tree.right[node] = _grow(tree, X, y, w, right_idx, depth + 1, hp, n_classes, rng, w_all)
    return node


@dataclass
class ForestModel:
    hp: ForestHyperParams
    task: str  # classify | regress
    classes_: np.ndarray | None
    trees: list[_Tree] = field(repr=False, default_factory=list)
    n_features: int = 0

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.task != "classify":
            raise ValueError("probabilities only for classifiers")
        X = np.asarray(X, dtype=np.float64)
        acc = np.zeros((X.shape[0], len(self.classes_)))
        for tree in self.trees:
            leaves = tree.apply(X)
            acc += np.stack([tree.value[i] for i in leaves])
        return acc / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.task == "classify":
            # argmax takes the first maximum: lowest class index wins ties
            return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            leaves = tree.apply(X)
            acc += np.array([tree.value[i] for i in leaves])
        return acc / len(self.trees)


def train_forest(X: np.ndarray, y: np.ndarray, hp: ForestHyperParams,
                 task: str = "classify", class_weight: str | None = None,
                 jobs: int = 1) -> ForestModel:
    """Grow hp.n_trees CART trees on bootstrap resamples.

    class_weight="balanced" weighs samples inversely to class frequency.  A
    single-class target yields a constant classifier with a warning rather
    than an error.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise ValueError("need |X| == |y| >= 2")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    n, d = X.shape

    if task == "classify":
        classes, y_enc = np.unique(y, return_inverse=True)
        n_classes = len(classes)
        if n_classes < 2:
            warnings.warn("single-class labels; returning a constant model",
                          UserWarning)
        if class_weight == "balanced":
            freq = np.bincount(y_enc, minlength=n_classes)
            w = (n / (n_classes * freq))[y_enc]
        else:
            w = np.ones(n)
        y_fit = y_enc
    else:
        classes, n_classes = None, None
        y_fit = y.astype(np.float64)
        w = np.ones(n)

    def grow_one(t: int) -> _Tree:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=hp.seed,
                                                           spawn_key=(t,)))
        boot = rng.integers(0, n, size=n)
        tree = _Tree(d)
        _grow(tree, X, y_fit, w, boot, 0, hp, n_classes, rng, w[boot].sum())
        return tree

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(grow_one, range(hp.n_trees)))
    else:
        trees = [grow_one(t) for t in range(hp.n_trees)]
    return ForestModel(hp=hp, task=task, classes_=classes, trees=trees, n_features=d)


def feature_importance(model: ForestModel) -> np.ndarray:
    """Mean impurity decrease per feature, normalized to sum to one.

    A forest that never split (all-constant input) gets a zero vector and a
    NoSplitsWarning.
    """
    acc = np.zeros(model.n_features)
    for tree in model.trees:
        total = tree.importance.sum()
        if total > 0:
            acc += tree.importance / total
    s = acc.sum()
    if s == 0:
        warnings.warn("forest grew no splits; importances are all zero",
                      NoSplitsWarning)
        return acc
    return acc / s
