"""Binary classification metrics: confusion counts, report, ROC and AUC."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    false: ClassMetrics
    true: ClassMetrics
    accuracy: float
    macro: ClassMetrics
    weighted: ClassMetrics

    def to_json(self) -> dict:
        def row(m: ClassMetrics):
            return {"precision": m.precision, "recall": m.recall, "f1-score": m.f1, "support": m.support}
        return {
            "False": row(self.false),
            "True": row(self.true),
            "accuracy": self.accuracy,
            "macro avg": row(self.macro),
            "weighted avg": row(self.weighted),
        }


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true, dtype=bool)
    p = np.asarray(y_pred, dtype=bool)
    if t.shape != p.shape or t.ndim != 1:
        raise ValidationError(f"label arrays differ in shape: {t.shape} vs {p.shape}")
    if t.size == 0:
        raise ValidationError("no labels to compare")
    return ConfusionMatrix(
        tp=int(np.sum(t & p)),
        fp=int(np.sum(~t & p)),
        fn=int(np.sum(t & ~p)),
        tn=int(np.sum(~t & ~p)),
    )


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def _class_metrics(correct: int, predicted: int, actual: int) -> ClassMetrics:
    precision = _ratio(correct, predicted)
    recall = _ratio(correct, actual)
    f1 = _ratio(2 * precision * recall, precision + recall)
    return ClassMetrics(precision, recall, f1, actual)


def report(cm: ConfusionMatrix) -> ClassificationReport:
    """Per-class, macro and support-weighted metrics; zero denominators give 0."""
    if cm.n < 1:
        raise ValidationError("empty confusion matrix")
    pos = _class_metrics(cm.tp, cm.tp + cm.fp, cm.tp + cm.fn)
    neg = _class_metrics(cm.tn, cm.tn + cm.fn, cm.tn + cm.fp)
    macro = ClassMetrics(
        (pos.precision + neg.precision) / 2,
        (pos.recall + neg.recall) / 2,
        (pos.f1 + neg.f1) / 2,
        cm.n,
    )
    wp, wn = pos.support / cm.n, neg.support / cm.n
    weighted = ClassMetrics(
        wp * pos.precision + wn * neg.precision,
        wp * pos.recall + wn * neg.recall,
        wp * pos.f1 + wn * neg.f1,
        cm.n,
    )
    return ClassificationReport(neg, pos, (cm.tp + cm.tn) / cm.n, macro, weighted)


def roc_points(y_true, scores) -> RocCurve:
    """ROC over descending distinct scores; tied scores form one step."""
    t = np.asarray(y_true, dtype=bool)
    s = np.asarray(scores, dtype=np.float64)
    if t.shape != s.shape or t.ndim != 1:
        raise ValidationError(f"truth and scores differ in shape: {t.shape} vs {s.shape}")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("ROC needs both classes in the truth labels")
    order = np.argsort(-s, kind="stable")
    s_sorted, t_sorted = s[order], t[order]
    tp = np.cumsum(t_sorted)
    fp = np.cumsum(~t_sorted)
    # last index of each run of equal scores
    ends = np.flatnonzero(np.append(s_sorted[1:] != s_sorted[:-1], True))
    tpr = np.concatenate([[0.0], tp[ends] / n_pos])
    fpr = np.concatenate([[0.0], fp[ends] / n_neg])
    return RocCurve(fpr, tpr)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC curve."""
    x, y = curve.fpr, curve.tpr
    return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) / 2))


def write_roc_csv(curve: RocCurve, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for x, y in curve.points:
            w.writerow([repr(x), repr(y)])


def positive_f1_all_positive(y_true) -> float:
    """Positive-class F1 of the constant classifier that flags every row."""
    t = np.asarray(y_true, dtype=bool)
    return report(confusion(t, np.ones_like(t))).true.f1


def positive_f1_majority(y_true) -> float:
    """Positive-class F1 of predicting the majority class for every row."""
    t = np.asarray(y_true, dtype=bool)
    majority = t.sum() * 2 > t.size
    return report(confusion(t, np.full_like(t, majority))).true.f1
