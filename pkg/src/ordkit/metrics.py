"""Evaluation kernels: per-class accuracy, macro accuracy, F1, AUC,
decision-threshold sweeps, and the paired t-test.

All functions are pure and stateless. Classification at a threshold t uses
the inclusive rule (predict 1 iff probability >= t) so sweeps are
reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .errors import DataError


@dataclass(frozen=True)
class BinaryConfusion:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise DataError("confusion counts must be non-negative")


@dataclass(frozen=True)
class ClassificationMetrics:
    minority_acc: float | None
    majority_acc: float | None
    macro_acc: float | None
    f1: float


def confusion(y_true, y_pred) -> BinaryConfusion:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    return BinaryConfusion(
        tp=int(np.sum((y_true == 1) & (y_pred == 1))),
        fp=int(np.sum((y_true == 0) & (y_pred == 1))),
        fn=int(np.sum((y_true == 1) & (y_pred == 0))),
        tn=int(np.sum((y_true == 0) & (y_pred == 0))),
    )


def classification_metrics(c: BinaryConfusion) -> ClassificationMetrics:
    """minority recall, majority recall, their mean, and F1 (0/0 -> 0)."""
    pos = c.tp + c.fn
    neg = c.tn + c.fp
    minority = c.tp / pos if pos else None
    majority = c.tn / neg if neg else None
    macro = (minority + majority) / 2.0 if (pos and neg) else None
    denom = 2 * c.tp + c.fp + c.fn
    f1 = 2 * c.tp / denom if denom else 0.0
    return ClassificationMetrics(minority, majority, macro, f1)


def auc(y_true, scores) -> float:
    """Mann-Whitney AUC: (concordant pairs + 0.5 * ties) / (n1 * n0).

    Computed through midranks, which is exactly the pair-counting value.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    n1 = int(np.sum(y_true == 1))
    n0 = y_true.size - n1
    if n1 == 0 or n0 == 0:
        raise DataError("AUC needs both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(y_true.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < sorted_scores.size:
        j = i
        while j + 1 < sorted_scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    r1 = ranks[y_true == 1].sum()
    return float((r1 - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def threshold_sweep(y_true, scores, grid):
    """Macro accuracy of the rule (score >= t) over a threshold grid.

    Returns ``(best_threshold, best_macro, curve)`` where curve is the list
    of (threshold, macro) pairs in grid order. Ties prefer the threshold
    closest to 0.5, then the larger one.
    """
    grid = list(grid)
    if not grid:
        raise DataError("threshold grid is empty")
    y_true = np.asarray(y_true, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    curve = []
    for t in grid:
        pred = (scores >= t).astype(np.int64)
        m = classification_metrics(confusion(y_true, pred))
        curve.append((float(t), m.macro_acc))
    best_t, best_m = None, None
    for t, m in curve:
        if best_m is None or m > best_m:
            best_t, best_m = t, m
        elif m == best_m:
            d_new, d_old = abs(t - 0.5), abs(best_t - 0.5)
            if d_new < d_old or (d_new == d_old and t > best_t):
                best_t = t
    return best_t, best_m, curve


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p_value: float
    degenerate: bool = False


def paired_t_test(a, b) -> TTestResult:
    """Two-sided paired t-test of a vs b.

    t = mean(d) / (sd(d) / sqrt(n)) with the sample (n-1) standard
    deviation; the p-value comes from the regularized incomplete beta
    I_{df/(df+t^2)}(df/2, 1/2). Zero-variance differences are flagged:
    p = 0 when the mean is nonzero, p = 1 when it is zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size < 2:
        raise DataError("paired t-test needs two equal-length samples, n >= 2")
    d = a - b
    n = d.size
    df = n - 1
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, df=df, p_value=1.0, degenerate=True)
        return TTestResult(t=math.copysign(math.inf, mean), df=df,
                           p_value=0.0, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TTestResult(t=t, df=df, p_value=p)
