"""Confusion counts, per-class precision/recall/F1, macro F1, ROC and AUC.

All values are fractions in [0, 1]; report renderers multiply by 100.
Undefined 0/0 ratios are reported as 0.0 and flagged rather than NaN so
report files stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deepagent.errors import UsageError


@dataclass
class ConfusionMatrix:
    """counts[i][j] = samples with true class i predicted as class j."""

    counts: np.ndarray

    def tp(self, c: int) -> int:
        return int(self.counts[c, c])

    def fp(self, c: int) -> int:
        return int(self.counts[1 - c, c])

    def fn(self, c: int) -> int:
        return int(self.counts[c, 1 - c])

    def tn(self, c: int) -> int:
        return int(self.counts[1 - c, 1 - c])

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class RocCurve:
    points: list  # (fpr, tpr, threshold), thresholds descending
    auc: float


def _check_binary(values, name):
    arr = np.asarray(values)
    if not np.all(np.isin(arr, (0, 1))):
        raise UsageError(f"{name} must contain only 0/1 values")
    return arr.astype(int)


def confusion(labels, predictions) -> ConfusionMatrix:
    y = _check_binary(labels, "labels")
    p = _check_binary(predictions, "predictions")
    if len(y) != len(p):
        raise UsageError(f"length mismatch: {len(y)} labels vs {len(p)} predictions")
    counts = np.zeros((2, 2), dtype=int)
    for yi, pi in zip(y, p):
        counts[yi, pi] += 1
    return ConfusionMatrix(counts)


def accuracy(cm: ConfusionMatrix) -> float:
    return float(np.trace(cm.counts) / cm.total)


def precision(cm: ConfusionMatrix, c: int) -> tuple[float, bool]:
    """(value, defined); 0/0 yields (0.0, False)."""
    denom = cm.tp(c) + cm.fp(c)
    if denom == 0:
        return 0.0, False
    return cm.tp(c) / denom, True


def recall(cm: ConfusionMatrix, c: int) -> tuple[float, bool]:
    denom = cm.tp(c) + cm.fn(c)
    if denom == 0:
        return 0.0, False
    return cm.tp(c) / denom, True


def f1_per_class(cm: ConfusionMatrix, c: int) -> float:
    """2*TP / (2*TP + FP + FN); a zero denominator contributes 0."""
    denom = 2 * cm.tp(c) + cm.fp(c) + cm.fn(c)
    if denom == 0:
        return 0.0
    return 2 * cm.tp(c) / denom


def macro_f1(cm: ConfusionMatrix) -> float:
    return 0.5 * (f1_per_class(cm, 0) + f1_per_class(cm, 1))


def roc_auc(labels, scores) -> RocCurve:
    """ROC curve over thresholds at each distinct score; trapezoidal AUC.

    Tied scores enter the curve in a single step, so the curve (and AUC)
    matches the pairwise-comparison definition including half credit for
    ties.
    """
    y = _check_binary(labels, "labels")
    s = np.asarray(scores, dtype=float)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UsageError("ROC needs both classes present")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    points = [(0.0, 0.0, float("inf"))]
    tp = fp = 0
    i = 0
    n = len(y)
    while i < n:
        j = i
        while j < n and s_sorted[j] == s_sorted[i]:
            tp += int(y_sorted[j])
            fp += 1 - int(y_sorted[j])
            j += 1
        points.append((fp / n_neg, tp / n_pos, float(s_sorted[i])))
        i = j
    points.append((1.0, 1.0, float("-inf")))
    auc = 0.0
    for (f0, t0, _), (f1_, t1, _) in zip(points, points[1:]):
        auc += (f1_ - f0) * (t0 + t1) / 2.0
    return RocCurve(points, auc)


def metric_report(labels, predictions, scores=None) -> dict:
    """Assemble the metric report dictionary (values as fractions)."""
    cm = confusion(labels, predictions)
    undefined = []
    prec, rec = [], []
    for c in (0, 1):
        v, ok = precision(cm, c)
        prec.append(v)
        if not ok:
            undefined.append(f"precision_{c}")
        v, ok = recall(cm, c)
        rec.append(v)
        if not ok:
            undefined.append(f"recall_{c}")
    report = {
        "accuracy": accuracy(cm),
        "precision_per_class": prec,
        "recall_per_class": rec,
        "f1_per_class": [f1_per_class(cm, 0), f1_per_class(cm, 1)],
        "macro_f1": macro_f1(cm),
        "auc": None,
        "confusion": cm.counts.tolist(),
        "undefined": undefined,
    }
    if scores is not None:
        report["auc"] = roc_auc(labels, scores).auc
    return report
