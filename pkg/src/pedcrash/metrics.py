"""Confusion matrices, accuracy/precision/recall/F1, one-vs-rest ROC and PR curves."""
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import rankdata

from .errors import PedcrashError

N_CLASSES = 3


class MetricError(PedcrashError, ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true category, columns = predicted

    @property
    def total(self):
        return int(self.counts.sum())

    def one_vs_rest(self, c):
        """(TP, FP, FN, TN) treating category c as positive."""
        m = self.counts
        tp = int(m[c, c])
        fp = int(m[:, c].sum() - tp)
        fn = int(m[c, :].sum() - tp)
        return tp, fp, fn, self.total - tp - fp - fn

    def row_normalized(self):
        rows = self.counts.sum(axis=1, keepdims=True).astype(float)
        return np.divide(self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)

    def to_dict(self):
        return {"counts": self.counts.tolist(), "row_normalized": self.row_normalized().tolist()}


def confusion(y_true, y_pred, n_classes=N_CLASSES):
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise MetricError(f"length mismatch: {y_true.size} true vs {y_pred.size} predicted labels")
    if y_true.size == 0:
        raise MetricError("cannot build a confusion matrix from empty input")
    for arr in (y_true, y_pred):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise MetricError(f"labels must lie in 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def _safe_div(num, den):
    return (num / den, False) if den > 0 else (0.0, True)


@dataclass
class MetricReport:
    accuracy: float
    precision: list
    recall: list
    f1: list
    support: list
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    auc_ovr_macro: float = None
    average_precision_macro: float = None
    zero_division: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def binary_metrics(tp, fp, fn, tn):
    """Accuracy, precision, recall, F1 for one positive class; zero denominators give 0."""
    acc = (tp + tn) / (tp + tn + fp + fn)
    prec, _ = _safe_div(tp, tp + fp)
    rec, _ = _safe_div(tp, tp + fn)
    f1, _ = _safe_div(2 * prec * rec, prec + rec)
    return acc, prec, rec, f1


def classification_report(cm):
    """Per-category one-vs-rest precision/recall/F1 plus macro and support-weighted means.

    Everything is computed in exact rational arithmetic and rounded to float
    once, so each field is the correctly rounded value of its definition.
    Support-weighted recall is sum_c TP_c / N and therefore equals accuracy.
    """
    if cm.total == 0:
        raise MetricError("empty confusion matrix")
    k = cm.counts.shape[0]
    n = cm.total
    precision, recall, f1, support, flags = [], [], [], [], []
    for c in range(k):
        tp, fp, fn, _ = cm.one_vs_rest(c)
        p = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
        r = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
        f = 2 * p * r / (p + r) if p + r else Fraction(0)
        if tp + fp == 0:
            flags.append(f"precision[{c}]")
        if tp + fn == 0:
            flags.append(f"recall[{c}]")
        precision.append(p)
        recall.append(r)
        f1.append(f)
        support.append(tp + fn)

    def weighted(vals):
        return float(sum(Fraction(s, n) * v for s, v in zip(support, vals)))

    return MetricReport(
        accuracy=float(Fraction(int(np.trace(cm.counts)), n)),
        precision=[float(v) for v in precision],
        recall=[float(v) for v in recall],
        f1=[float(v) for v in f1],
        support=support,
        macro_precision=float(sum(precision) / k),
        macro_recall=float(sum(recall) / k),
        macro_f1=float(sum(f1) / k),
        weighted_precision=weighted(precision),
        weighted_recall=weighted(recall),
        weighted_f1=weighted(f1),
        zero_division=flags,
    )


@dataclass
class CurvePoints:
    kind: str  # "roc" or "pr"
    x: list
    y: list
    area: float
    category: int = 0

    def to_dict(self):
        return asdict(self)


def rank_auc(pos_scores, neg_scores):
    """Mann-Whitney AUC with mid-ranks for ties."""
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    ranks = rankdata(np.concatenate([pos, neg]), method="average")
    n_pos, n_neg = pos.size, neg.size
    return float((ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _threshold_counts(positive, score):
    """Cumulative TP/FP at each distinct score, thresholds descending."""
    order = np.argsort(-score, kind="mergesort")
    s = score[order]
    pos = positive[order].astype(float)
    distinct = np.flatnonzero(np.diff(s)) if s.size > 1 else np.zeros(0, dtype=np.int64)
    ends = np.r_[distinct, s.size - 1]
    tp = np.cumsum(pos)[ends]
    fp = (ends + 1) - tp
    return tp, fp


def _check_scores(y_true, scores):
    y_true = np.asarray(y_true, dtype=np.int64)
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[0] != y_true.shape[0] or y_true.size == 0:
        raise MetricError("scores must be an (n, categories) matrix matching the labels")
    return y_true, scores


def roc_auc_ovr(y_true, scores):
    """Per-category ROC curves and the macro one-vs-rest AUC.

    Categories without positives or without negatives are skipped (returned
    as None); an error is raised if every category is skipped.
    """
    y_true, scores = _check_scores(y_true, scores)
    curves, aucs = [], []
    for c in range(scores.shape[1]):
        positive = y_true == c
        if positive.all() or not positive.any():
            curves.append(None)
            continue
        tp, fp = _threshold_counts(positive, scores[:, c])
        tpr = np.r_[0.0, tp / positive.sum()]
        fpr = np.r_[0.0, fp / (~positive).sum()]
        auc = rank_auc(scores[positive, c], scores[~positive, c])
        curves.append(CurvePoints("roc", fpr.tolist(), tpr.tolist(), auc, c))
        aucs.append(auc)
    if not aucs:
        raise MetricError("AUC undefined: no category has both positives and negatives")
    return curves, float(np.mean(aucs))


def pr_average_precision(y_true, scores):
    """Per-category precision-recall curves and macro step-wise average precision.

    AP = sum over descending thresholds of (recall step) * precision, with no
    interpolation.
    """
    y_true, scores = _check_scores(y_true, scores)
    curves, aps = [], []
    for c in range(scores.shape[1]):
        positive = y_true == c
        if positive.all() or not positive.any():
            curves.append(None)
            continue
        tp, fp = _threshold_counts(positive, scores[:, c])
        precision = tp / (tp + fp)
        recall = tp / positive.sum()
        ap = float(np.sum(np.diff(np.r_[0.0, recall]) * precision))
        curves.append(CurvePoints("pr", np.r_[0.0, recall].tolist(), np.r_[1.0, precision].tolist(), ap, c))
        aps.append(ap)
    if not aps:
        raise MetricError("average precision undefined: no category has both positives and negatives")
    return curves, float(np.mean(aps))


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def trapezoid_area(curve):
    return float(_trapezoid(curve.y, curve.x))


def evaluate(y_true, scores):
    """Full report from probability scores: argmax labels, threshold metrics, AUC, AP."""
    y_true, scores = _check_scores(y_true, scores)
    cm = confusion(y_true, np.argmax(scores, axis=1), scores.shape[1])
    report = classification_report(cm)
    try:
        _, report.auc_ovr_macro = roc_auc_ovr(y_true, scores)
        _, report.average_precision_macro = pr_average_precision(y_true, scores)
    except MetricError:
        report.zero_division.append("auc")
    return report, cm
