"""Detection metrics: confusion counts, ROC/PR curves, AUROC, AUPRC,
and balanced detection accuracy at the ROC-optimal threshold.

Conventions, fixed so ties are never ambiguous:

* a sample is predicted positive (= flagged as outlier) iff its score is
  >= the threshold (closed comparison);
* tied scores collapse into a single curve point;
* AUROC is the rank statistic - the probability that a random positive
  outscores a random negative, ties counting one half - computed in exact
  integer arithmetic before the single final division, which makes it
  identical to trapezoidal integration of the ROC curve;
* AUPRC uses step (not linear) interpolation over decreasing thresholds;
* detection accuracy is the maximum over ROC thresholds of
  (TPR + (1 - FPR)) / 2, i.e. balanced accuracy, which is
  prevalence-independent and always at least 0.5.

All functions are pure over immutable sample sequences.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

POSITIVE_IS_OOD = True  # detectors emit higher scores for outliers


@dataclass(frozen=True)
class ScoredSample:
    """One detector output: the score and the ground-truth outlier flag.
    Positive class = outlier."""

    score: float
    is_ood: bool


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float
    precision: float


def _as_arrays(samples):
    scores = np.array([s.score for s in samples], dtype=np.float64)
    flags = np.array([bool(s.is_ood) for s in samples])
    if scores.size == 0:
        raise DomainError("metrics need a nonempty sample set")
    if not np.all(np.isfinite(scores)):
        raise DomainError("scores must be finite")
    return scores, flags


def _require_both_classes(flags):
    pos = int(flags.sum())
    neg = int(flags.size - pos)
    if pos == 0 or neg == 0:
        raise DomainError("degenerate input: need at least one positive and one negative sample")
    return pos, neg


def confusion_at_threshold(samples, tau: float):
    """(TP, FP, TN, FN) with predicted-positive meaning score >= tau."""
    scores, flags = _as_arrays(samples)
    pred = scores >= tau
    tp = int(np.count_nonzero(pred & flags))
    fp = int(np.count_nonzero(pred & ~flags))
    tn = int(np.count_nonzero(~pred & ~flags))
    fn = int(np.count_nonzero(~pred & flags))
    return tp, fp, tn, fn


def _cumulative_counts(scores, flags):
    """Distinct thresholds (descending) with cumulative TP/FP integers."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    f = flags[order]
    thresholds, tps, fps = [], [], []
    tp = fp = 0
    i = 0
    n = s.size
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            if f[j]:
                tp += 1
            else:
                fp += 1
            j += 1
        thresholds.append(float(s[i]))
        tps.append(tp)
        fps.append(fp)
        i = j
    return thresholds, tps, fps


def roc_curve(samples):
    """One :class:`RocPoint` per distinct score, descending, preceded by
    the (0, 0) anchor at threshold +inf; the final point is always
    (1, 1). Precision at zero predicted positives is defined as 1."""
    scores, flags = _as_arrays(samples)
    pos, neg = _require_both_classes(flags)
    thresholds, tps, fps = _cumulative_counts(scores, flags)
    points = [RocPoint(threshold=math.inf, tpr=0.0, fpr=0.0, precision=1.0)]
    for t, tp, fp in zip(thresholds, tps, fps):
        points.append(
            RocPoint(threshold=t, tpr=tp / pos, fpr=fp / neg, precision=tp / (tp + fp))
        )
    return points


def auroc_counts(samples):
    """Exact integer form of the rank statistic: (2U, 2PN) where
    AUROC = 2U / 2PN. Useful when a test needs the identity itself rather
    than its rounded quotient."""
    scores, flags = _as_arrays(samples)
    pos, neg = _require_both_classes(flags)
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    f = flags[order]
    wins2 = 0
    neg_below = 0
    i = 0
    n = s.size
    while i < n:
        j = i
        p_here = n_here = 0
        while j < n and s[j] == s[i]:
            if f[j]:
                p_here += 1
            else:
                n_here += 1
            j += 1
        wins2 += p_here * (2 * neg_below + n_here)
        neg_below += n_here
        i = j
    return wins2, 2 * pos * neg


def auroc(samples) -> float:
    """Probability a random outlier outscores a random inlier (ties count
    one half); equals the trapezoidal area under :func:`roc_curve`."""
    wins2, total2 = auroc_counts(samples)
    return wins2 / total2


def auprc(samples) -> float:
    """Area under precision-recall by step summation over decreasing
    thresholds: sum (R_i - R_{i-1}) * P_i."""
    scores, flags = _as_arrays(samples)
    pos = int(flags.sum())
    if pos == 0:
        raise DomainError("auprc needs at least one positive sample")
    _, tps, fps = _cumulative_counts(scores, flags)
    area = 0.0
    prev_tp = 0
    for tp, fp in zip(tps, fps):
        area += ((tp - prev_tp) / pos) * (tp / (tp + fp))
        prev_tp = tp
    return area


def detection_accuracy(samples) -> float:
    """Balanced accuracy at the best ROC threshold (>= 0.5 always: the
    all-negative threshold achieves exactly one half)."""
    scores, flags = _as_arrays(samples)
    pos, neg = _require_both_classes(flags)
    _, tps, fps = _cumulative_counts(scores, flags)
    best = pos * neg  # tp=fp=0 anchor: 0*neg + (neg-0)*pos
    for tp, fp in zip(tps, fps):
        best = max(best, tp * neg + (neg - fp) * pos)
    return best / (2 * pos * neg)


def write_curve_csv(path, points):
    """threshold,tpr,fpr,precision - one row per curve point."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "tpr", "fpr", "precision"])
        for p in points:
            writer.writerow([repr(p.threshold), repr(p.tpr), repr(p.fpr), repr(p.precision)])
