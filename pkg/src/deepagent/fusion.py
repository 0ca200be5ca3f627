"""Meta-feature assembly and cross-validated evaluation of the fused model.

Per video the two agents each contribute one score in [0, 1]; those pairs
(or their four-component complement expansion when ``meta_dims=4``) feed a
random forest evaluated under stratified K-fold cross-validation. The
standardizer is fit on each fold's training split only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from deepagent.errors import UsageError
from deepagent.forest import predict_forest_batch, stratified_kfold, train_forest
from deepagent.metrics import (
    accuracy,
    confusion,
    macro_f1,
    precision,
    recall,
    roc_auc,
)


@dataclass
class MetaFeature:
    sample_id: str
    z: np.ndarray          # [agent1 score, agent2 score]
    label: int


@dataclass
class FoldResult:
    """Per-fold metrics as fractions; precision/recall are for the fake class."""

    fold: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    precision_macro: float
    recall_macro: float
    roc: list = field(default_factory=list)

    def row(self) -> dict:
        return {
            "fold": self.fold,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
        }


def build_meta_features(agent1_scores, agent2_scores, labels) -> list[MetaFeature]:
    """Align the three (sample_id, value) sequences into meta-features.

    Order follows ``agent1_scores``; any id missing from either other
    sequence is an error listing every unmatched id.
    """
    a1 = list(agent1_scores)
    a2 = dict(agent2_scores)
    lab = dict(labels)
    if len(a1) != len(a2) or len(a1) != len(lab):
        raise UsageError(
            f"score/label lengths differ: {len(a1)}, {len(a2)}, {len(lab)}")
    missing = [sid for sid, _ in a1 if sid not in a2 or sid not in lab]
    if missing:
        raise UsageError(f"unmatched sample ids: {', '.join(sorted(missing))}")
    return [
        MetaFeature(sid, np.array([s1, a2[sid]], dtype=float), int(lab[sid]))
        for sid, s1 in a1
    ]


def expand_meta(z: np.ndarray, meta_dims: int) -> np.ndarray:
    """2-dim scores, or the redundant 4-component variant
    [p1(real), p1(fake), p2(consistent), p2(inconsistent)]."""
    if meta_dims == 2:
        return z
    if meta_dims == 4:
        return np.array([1.0 - z[0], z[0], 1.0 - z[1], z[1]])
    raise UsageError(f"meta_dims must be 2 or 4, got {meta_dims}")


def cross_validate_meta(meta: list[MetaFeature], *, folds: int = 5,
                        n_trees: int = 100, seed: int = 42,
                        meta_dims: int = 2) -> list[FoldResult]:
    """Run the stratified-CV evaluation loop over assembled meta-features."""
    Z = np.stack([expand_meta(m.z, meta_dims) for m in meta])
    y = np.array([m.label for m in meta], dtype=int)
    results = []
    for f, (train_idx, val_idx) in enumerate(stratified_kfold(y, folds, seed)):
        model = train_forest(Z[train_idx], y[train_idx], n_trees=n_trees,
                             seed=seed + f)
        probs, preds = predict_forest_batch(model, Z[val_idx])
        cm = confusion(y[val_idx], preds)
        roc = roc_auc(y[val_idx], probs)
        results.append(FoldResult(
            fold=f + 1,
            accuracy=accuracy(cm),
            precision=precision(cm, 1)[0],
            recall=recall(cm, 1)[0],
            f1=macro_f1(cm),
            auc=roc.auc,
            precision_macro=(precision(cm, 0)[0] + precision(cm, 1)[0]) / 2.0,
            recall_macro=(recall(cm, 0)[0] + recall(cm, 1)[0]) / 2.0,
            roc=[list(p) for p in roc.points],
        ))
    return results


def mean_row(results: list[FoldResult]) -> dict:
    keys = ("accuracy", "precision", "recall", "f1", "auc",
            "precision_macro", "recall_macro")
    row = {"fold": "mean"}
    for key in keys:
        row[key] = float(np.mean([getattr(r, key) for r in results]))
    return row


def _json_threshold(value: float):
    # strict JSON has no Infinity literal; sentinels become strings
    if value == float("inf"):
        return "inf"
    if value == float("-inf"):
        return "-inf"
    return value


def fold_report(results: list[FoldResult]) -> list[dict]:
    """JSON-ready rows: one per fold (with ROC points) plus the mean row."""
    rows = []
    for r in results:
        row = r.row()
        row["roc"] = [[fpr, tpr, _json_threshold(thr)] for fpr, tpr, thr in r.roc]
        rows.append(row)
    rows.append(mean_row(results))
    return rows
