"""Binary classification metrics: confusion counts, rates, kappa, errors, ROC."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts laid out as rows = true class (0, 1), columns = predicted."""

    tn: int
    fp: int
    fn: int
    tp: int

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    def as_matrix(self) -> list[list[int]]:
        return [[self.tn, self.fp], [self.fn, self.tp]]

    def row_normalized(self) -> list[list[float]]:
        """Each true-class row divided by its own total (0.0 for an empty row)."""
        out = []
        for a, b in self.as_matrix():
            s = a + b
            out.append([a / s if s else 0.0, b / s if s else 0.0])
        return out


def _binary(v, name) -> np.ndarray:
    a = np.asarray(v)
    if a.ndim != 1:
        raise MetricError(f"{name} must be a vector")
    if not np.isin(a, (0, 1)).all():
        raise MetricError(f"{name} contains values other than 0 and 1")
    return a.astype(np.int64)


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = _binary(y_true, "y_true")
    p = _binary(y_pred, "y_pred")
    if t.shape != p.shape:
        raise MetricError(f"length mismatch: {t.shape[0]} vs {p.shape[0]}")
    if t.size == 0:
        raise MetricError("no samples")
    c = np.bincount(2 * t + p, minlength=4)
    return ConfusionMatrix(int(c[0]), int(c[1]), int(c[2]), int(c[3]))


def classification_rates(cm: ConfusionMatrix) -> tuple[float, float, float, float]:
    """(accuracy, precision, recall, f1); empty denominators give 0."""
    if cm.total == 0:
        raise MetricError("empty confusion matrix")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return accuracy, precision, recall, f1


def cohens_kappa(cm: ConfusionMatrix) -> float:
    n = cm.total
    if n == 0:
        raise MetricError("empty confusion matrix")
    p_o = (cm.tp + cm.tn) / n
    p_e = ((cm.tn + cm.fp) * (cm.tn + cm.fn) + (cm.fn + cm.tp) * (cm.fp + cm.tp)) / (n * n)
    if p_e == 1.0:
        return 0.0
    return (p_o - p_e) / (1.0 - p_e)


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise MetricError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise MetricError("no samples")
    return a, b


def mse(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    # fsum keeps the mean independent of summation order
    return math.fsum(((a - b) ** 2).tolist()) / a.size


def rmse(y_true, y_pred) -> float:
    return math.sqrt(mse(y_true, y_pred))


@dataclass(frozen=True)
class RocCurve:
    fpr: tuple[float, ...]
    tpr: tuple[float, ...]
    thresholds: tuple[float, ...]
    auc: float

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.fpr, self.tpr, self.thresholds))


def roc_auc(y_true, scores) -> RocCurve:
    """ROC points for every distinct score (predict 1 iff score >= threshold).

    The curve starts at (0, 0) with threshold +inf and ends at (1, 1) with
    threshold -inf; the area is the trapezoid rule over all points, so tied
    scores contribute a diagonal segment (the ties-count-half convention).
    """
    y = _binary(y_true, "y_true")
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise MetricError(f"length mismatch: {y.shape[0]} vs {s.shape[0]}")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC undefined: y_true holds a single class")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # last index of each run of equal scores
    cut = np.r_[np.flatnonzero(s_sorted[1:] != s_sorted[:-1]), s.size - 1]
    tp = np.cumsum(y_sorted)[cut]
    fp = (cut + 1) - tp
    fpr = np.r_[0.0, fp / n_neg, 1.0]
    tpr = np.r_[0.0, tp / n_pos, 1.0]
    thr = np.r_[np.inf, s_sorted[cut], -np.inf]
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(tuple(fpr.tolist()), tuple(tpr.tolist()), tuple(thr.tolist()), auc)


def format_threshold(t: float) -> str:
    if math.isinf(t):
        return "inf" if t > 0 else "-inf"
    return repr(float(t))


def write_roc_csv(curve: RocCurve, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("threshold,fpr,tpr\n")
        for f, t, th in curve.points:
            fh.write(f"{format_threshold(th)},{f!r},{t!r}\n")


@dataclass(frozen=True)
class EvalReport:
    algorithm_name: str
    accuracy: float
    precision: float
    recall: float
    f1: float
    kappa: float
    mse: float
    rmse: float
    auc: float
    confusion: ConfusionMatrix
    confusion_row_normalized: list
    roc: RocCurve
    seed: int = 0
    config_echo: str = ""

    def to_dict(self, include_roc: bool = False) -> dict:
        d = {
            "algorithm": self.algorithm_name,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "kappa": self.kappa,
            "mse": self.mse,
            "rmse": self.rmse,
            "auc": self.auc,
            "confusion": {"tn": self.confusion.tn, "fp": self.confusion.fp,
                          "fn": self.confusion.fn, "tp": self.confusion.tp},
            "confusion_row_normalized": self.confusion_row_normalized,
            "seed": self.seed,
            "config_echo": self.config_echo,
        }
        if include_roc:
            d["roc"] = [
                {"threshold": format_threshold(th), "fpr": f, "tpr": t}
                for f, t, th in self.roc.points
            ]
        return d


def evaluate(
    name: str,
    y_true: Sequence[int],
    scores: Sequence[float],
    labels: Sequence[int],
    probabilities: Optional[Sequence[float]] = None,
    error_mode: str = "label",
    seed: int = 0,
    config_echo: str = "",
) -> EvalReport:
    """Every metric for one (model, test set) pair.

    ``error_mode="label"`` computes MSE/RMSE on hard 0/1 predictions;
    ``"proba"`` uses ``probabilities`` (or the scores when omitted), giving
    the Brier score.  The ROC curve always uses the raw scores.
    """
    if error_mode not in ("label", "proba"):
        raise MetricError(f"unknown error mode {error_mode!r}")
    cm = confusion(y_true, labels)
    acc, prec, rec, f1 = classification_rates(cm)
    if error_mode == "label":
        err_pred = labels
    else:
        err_pred = scores if probabilities is None else probabilities
    m = mse(y_true, err_pred)
    roc = roc_auc(y_true, scores)
    return EvalReport(
        algorithm_name=name,
        accuracy=acc,
        precision=prec,
        recall=rec,
        f1=f1,
        kappa=cohens_kappa(cm),
        mse=m,
        rmse=math.sqrt(m),
        auc=roc.auc,
        confusion=cm,
        confusion_row_normalized=cm.row_normalized(),
        roc=roc,
        seed=seed,
        config_echo=config_echo,
    )
