"""Evaluation metrics with exact, hand-checkable definitions."""

import numpy as np

from ..errors import ConstantTarget


def r_squared(y, y_hat) -> float:
    """1 - residual sum of squares over total sum of squares about the mean."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.size < 2:
        raise ValueError("need equally sized y and y_hat with >= 2 entries")
    mu = y.mean()
    ss_tot = float(((y - mu) ** 2).sum())
    if ss_tot == 0:
        raise ConstantTarget("target has zero variance")
    ss_res = float(((y - y_hat) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def precision_recall(y_true, y_pred) -> dict:
    """Per-class precision and recall; undefined values are None, never 0."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError("length mismatch")
    out = {}
    for cls in sorted(set(y_true.tolist()) | set(y_pred.tolist())):
        tp = int(np.sum((y_true == cls) & (y_pred == cls)))
        fp = int(np.sum((y_true != cls) & (y_pred == cls)))
        fn = int(np.sum((y_true == cls) & (y_pred != cls)))
        precision = tp / (tp + fp) if tp + fp > 0 else None
        recall = tp / (tp + fn) if tp + fn > 0 else None
        out[cls] = {"precision": precision, "recall": recall}
    return out


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    return float(np.mean(y_true == y_pred))
