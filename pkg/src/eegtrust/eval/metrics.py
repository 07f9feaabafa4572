from __future__ import annotations

import numpy as np

from ..errors import DataError


def _pair(preds, labels):
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise DataError(f"length mismatch: {preds.shape} vs {labels.shape}")
    if preds.size == 0:
        raise DataError("empty prediction set")
    return preds, labels


def accuracy(preds, labels):
    preds, labels = _pair(preds, labels)
    return float(np.mean(preds == labels))


def precision_recall(preds, labels, positive=1):
    preds, labels = _pair(preds, labels)
    tp = int(np.sum((preds == positive) & (labels == positive)))
    fp = int(np.sum((preds == positive) & (labels != positive)))
    fn = int(np.sum((preds != positive) & (labels == positive)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall


def f1(preds, labels, positive=1):
    """Harmonic mean of precision and recall; 0 when both are 0."""
    p, r = precision_recall(preds, labels, positive)
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def roc_curve(scores, labels):
    """ROC points ``(fpr, tpr)`` sweeping the threshold over unique scores, high to low.

    Starts at (0, 0) and ends at (1, 1); tied scores move both rates at once.
    """
    scores, labels = _pair(np.asarray(scores, dtype=np.float64), labels)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both classes present")
    order = np.argsort(-scores, kind="mergesort")
    s, p = scores[order], pos[order]
    tps = np.cumsum(p)
    fps = np.cumsum(~p)
    # last index of each run of equal scores
    ends = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    fpr = np.r_[0.0, fps[ends] / n_neg]
    tpr = np.r_[0.0, tps[ends] / n_pos]
    return np.column_stack([fpr, tpr])


def auc(roc):
    """Trapezoidal area under ROC points."""
    roc = np.asarray(roc, dtype=np.float64)
    return float(np.sum(np.diff(roc[:, 0]) * (roc[1:, 1] + roc[:-1, 1]) / 2.0))


def roc_auc(scores, labels):
    return auc(roc_curve(scores, labels))
