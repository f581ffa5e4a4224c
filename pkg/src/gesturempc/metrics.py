"""Classification quality metrics for the gesture classifier.

Output-space error (MSE/RMSE of logits against one-hot targets), accuracy,
weighted precision/recall/F1 from the confusion matrix, and one-vs-rest
ROC/AUC per class with micro and macro averages.  AUC uses the rank
statistic (ties averaged), ROC points come from a full threshold sweep and
are emitted as plain numeric rows for external plotting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def confusion_matrix(y_true, y_pred, n_classes: int = 4) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(np.asarray(y_true, int), np.asarray(y_pred, int)):
        cm[t, p] += 1
    return cm


def precision_recall_f1(cm: np.ndarray) -> dict:
    """Per-class and support-weighted precision/recall/F1."""
    support = cm.sum(axis=1).astype(np.float64)
    pred_count = cm.sum(axis=0).astype(np.float64)
    tp = np.diag(cm).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_count > 0, tp / pred_count, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        f1 = np.where(
            precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0
        )
    total = support.sum()
    weights = support / total if total else np.zeros_like(support)
    return {
        "per_class": {
            "precision": precision.tolist(),
            "recall": recall.tolist(),
            "f1": f1.tolist(),
            "support": support.astype(int).tolist(),
        },
        "weighted": {
            "precision": float(np.sum(weights * precision)),
            "recall": float(np.sum(weights * recall)),
            "f1": float(np.sum(weights * f1)),
        },
    }


def auc_score(scores, positives) -> float:
    """Rank-based one-vs-rest AUC (Mann-Whitney, ties averaged)."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    rank = 1
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (rank + rank + (j - i)) / 2.0
        rank += j - i + 1
        i = j + 1
    rank_sum = float(ranks[positives].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_points(scores, positives) -> np.ndarray:
    """(n_thresholds, 2) array of (fpr, tpr) pairs, threshold-descending."""
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    order = np.argsort(-scores, kind="mergesort")
    tp = np.cumsum(positives[order]).astype(np.float64)
    fp = np.cumsum(~positives[order]).astype(np.float64)
    n_pos = max(float(positives.sum()), 1.0)
    n_neg = max(float((~positives).sum()), 1.0)
    pts = np.column_stack([fp / n_neg, tp / n_pos])
    return np.vstack([[0.0, 0.0], pts])


@dataclass
class EvalReport:
    accuracy: float
    mse: float
    rmse: float
    precision_weighted: float
    recall_weighted: float
    f1_weighted: float
    confusion: np.ndarray
    per_class: dict
    auc_per_class: list
    auc_macro: float
    auc_micro: float
    roc: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "mse": self.mse,
            "rmse": self.rmse,
            "precision_weighted": self.precision_weighted,
            "recall_weighted": self.recall_weighted,
            "f1_weighted": self.f1_weighted,
            "confusion": self.confusion.tolist(),
            "per_class": self.per_class,
            "auc_per_class": self.auc_per_class,
            "auc_macro": self.auc_macro,
            "auc_micro": self.auc_micro,
        }


def evaluate_outputs(logits: np.ndarray, onehot: np.ndarray) -> EvalReport:
    """Full report from raw logits and one-hot targets."""
    logits = np.asarray(logits, dtype=np.float64)
    onehot = np.asarray(onehot, dtype=np.float64)
    if logits.shape != onehot.shape or logits.ndim != 2:
        raise ValueError(f"logit/target shapes differ: {logits.shape} vs {onehot.shape}")
    if logits.shape[0] == 0:
        raise ValueError("empty evaluation set")
    n_classes = logits.shape[1]
    y_true = np.argmax(onehot, axis=1)
    y_pred = np.argmax(logits, axis=1)
    cm = confusion_matrix(y_true, y_pred, n_classes)
    prf = precision_recall_f1(cm)
    mse = float(np.mean((onehot - logits) ** 2))

    aucs = []
    roc = {}
    for c in range(n_classes):
        positives = y_true == c
        aucs.append(auc_score(logits[:, c], positives))
        roc[c] = roc_points(logits[:, c], positives)
    finite = [a for a in aucs if not np.isnan(a)]
    micro = auc_score(logits.ravel(), (onehot > 0.5).ravel())
    return EvalReport(
        accuracy=float(np.mean(y_true == y_pred)),
        mse=mse,
        rmse=float(np.sqrt(mse)),
        precision_weighted=prf["weighted"]["precision"],
        recall_weighted=prf["weighted"]["recall"],
        f1_weighted=prf["weighted"]["f1"],
        confusion=cm,
        per_class=prf["per_class"],
        auc_per_class=[float(a) for a in aucs],
        auc_macro=float(np.mean(finite)) if finite else float("nan"),
        auc_micro=float(micro),
        roc=roc,
    )
