"""Random forest capacity, importance, and determinism checks."""

import numpy as np
import pytest

from ringtrace.errors import NoSplitsWarning
from ringtrace.ml import ForestHyperParams, feature_importance, train_forest


def test_xor_memorized():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    y = np.array([0, 1, 1, 0])
    hp = ForestHyperParams(n_trees=50, max_depth=4, max_features=1.0,
                           min_samples_split=2, seed=1)
    model = train_forest(X, y, hp)
    assert np.array_equal(model.predict(X), y)


def test_single_class_constant_model():
    X = np.random.default_rng(0).normal(size=(20, 3))
    y = np.zeros(20, dtype=int)
    with pytest.warns(UserWarning, match="single-class"):
        model = train_forest(X, y, ForestHyperParams(n_trees=5, seed=2))
    assert np.array_equal(model.predict(X), y)


def test_separable_blobs_high_accuracy():
    rng = np.random.default_rng(3)
    X0 = rng.normal(loc=-2.0, size=(100, 4))
    X1 = rng.normal(loc=+2.0, size=(100, 4))
    X = np.vstack([X0, X1])
    y = np.array([0] * 100 + [1] * 100)
    from ringtrace.ml import ModelSpec, kfold_eval
    spec = ModelSpec("forest", "classify", {"n_trees": 30, "max_depth": 8})
    result = kfold_eval(spec, X, y, folds=5, seed=3)
    assert result["summary"]["accuracy"]["mean"] >= 0.95


def test_planted_signal_dominates_importance():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(300, 8))
    y = (X[:, 3] > 0).astype(int)
    # all features visible per split so the planted one always wins
    hp = ForestHyperParams(n_trees=40, max_features=1.0, seed=4)
    model = train_forest(X, y, hp)
    imp = feature_importance(model)
    assert imp[3] > 0.9


def test_importances_nonnegative_sum_one():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(150, 6))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    model = train_forest(X, y, ForestHyperParams(n_trees=25, seed=5))
    imp = feature_importance(model)
    assert np.all(imp >= 0)
    assert abs(imp.sum() - 1) < 1e-9


def test_constant_features_no_splits():
    X = np.ones((30, 4))
    y = np.array([0, 1] * 15)
    model = train_forest(X, y, ForestHyperParams(n_trees=5, seed=6))
    with pytest.warns(NoSplitsWarning):
        imp = feature_importance(model)
    assert np.all(imp == 0)


def test_deterministic_given_seed():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(120, 5))
    y = (X[:, 2] > 0.3).astype(int)
    hp = ForestHyperParams(n_trees=15, seed=7)
    p1 = train_forest(X, y, hp).predict_proba(X)
    p2 = train_forest(X, y, hp).predict_proba(X)
    assert np.array_equal(p1, p2)


def test_parallel_training_identical():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(100, 5))
    y = (X[:, 1] > 0).astype(int)
    hp = ForestHyperParams(n_trees=12, seed=8)
    p1 = train_forest(X, y, hp, jobs=1).predict_proba(X)
    p2 = train_forest(X, y, hp, jobs=3).predict_proba(X)
    assert np.array_equal(p1, p2)


def test_regressor_fits_step_function():
    rng = np.random.default_rng(9)
    X = rng.uniform(-1, 1, size=(400, 3))
    y = np.where(X[:, 0] > 0, 5.0, -5.0)
    hp = ForestHyperParams(n_trees=20, criterion="variance", seed=9)
    model = train_forest(X, y, hp, task="regress")
    pred = model.predict(X)
    assert np.mean((pred - y) ** 2) < 1.0


def test_class_weights_shift_minority_recall():
    rng = np.random.default_rng(10)
    n_maj, n_min = 300, 30
    X = np.vstack([rng.normal(0, 1.5, size=(n_maj, 3)),
                   rng.normal(1.2, 1.5, size=(n_min, 3))])
    y = np.array([0] * n_maj + [1] * n_min)
    hp = ForestHyperParams(n_trees=30, max_depth=4, seed=10)
    plain = train_forest(X, y, hp).predict(X)
    weighted = train_forest(X, y, hp, class_weight="balanced").predict(X)
    recall = lambda pred: np.sum((pred == 1) & (y == 1)) / n_min
    assert recall(weighted) >= recall(plain)


def test_bad_hyperparams_rejected():
    with pytest.raises(ValueError):
        ForestHyperParams(n_trees=0)
    with pytest.raises(ValueError):
        ForestHyperParams(max_features=1.5)


def test_entropy_criterion_also_learns():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(200, 4))
    y = (X[:, 0] > 0).astype(int)
    hp = ForestHyperParams(n_trees=15, criterion="entropy", seed=11)
    model = train_forest(X, y, hp)
    assert np.mean(model.predict(X) == y) >= 0.95
