"""Per-group utility metrics.

Every function takes plain array-likes in the scikit-learn argument order
(``y_true``, ``y_score``, then optional transaction ``values``). A metric whose
defining denominator is zero is reported as ``None`` (undefined), never 0.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .exceptions import NoPositivesError

Undefined = None


def _ratio(num, den) -> Optional[float]:
    if den == 0:
        return Undefined
    return float(num) / float(den)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    tp_value: float = 0.0
    fn_value: float = 0.0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn,
            self.tp_value + other.tp_value, self.fn_value + other.fn_value,
        )

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class UtilityMetrics:
    tpr: Optional[float]
    fpr: Optional[float]
    ppv: Optional[float]
    npv: Optional[float]
    f1: Optional[float]
    predicted_positive_rate: Optional[float]
    vdr: Optional[float]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: data.get(k) for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class ThresholdSearchResult:
    """Outcome of a threshold search at a target false-positive ratio."""

    threshold: float
    achieved_fp_ratio: Optional[float]
    tpr_at_threshold: float
    feasible: bool
    target: float
    vdr_at_threshold: Optional[float] = None
    tp: int = 0
    fp: int = 0

    def to_dict(self):
        return asdict(self)


def _arrays(y_true, y_score, values=None):
    y = np.asarray(y_true).ravel().astype(bool)
    s = np.asarray(y_score, dtype=float).ravel()
    if len(y) != len(s):
        raise ValueError(f"y_true has {len(y)} entries but y_score has {len(s)}")
    if values is None:
        v = np.zeros(len(s))
    else:
        v = np.asarray(values, dtype=float).ravel()
        if len(v) != len(s):
            raise ValueError(f"values has {len(v)} entries but y_score has {len(s)}")
    return y, s, v


def confusion_counts(y_true, y_score, threshold: float, values=None) -> ConfusionCounts:
    """Confusion counts with ``score >= threshold`` predicting fraud."""
    y, s, v = _arrays(y_true, y_score, values)
    pred = s >= threshold
    tp_mask = pred & y
    fn_mask = ~pred & y
    tp = int(np.count_nonzero(tp_mask))
    fn = int(np.count_nonzero(fn_mask))
    fp = int(np.count_nonzero(pred)) - tp
    tn = len(y) - tp - fn - fp
    return ConfusionCounts(tp, fp, tn, fn, float(v[tp_mask].sum()), float(v[fn_mask].sum()))


def utility_metrics(counts: ConfusionCounts) -> UtilityMetrics:
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    tpr = _ratio(tp, tp + fn)
    ppv = _ratio(tp, tp + fp)
    if tpr is None or ppv is None:
        f1 = Undefined
    else:
        f1 = _ratio(2 * ppv * tpr, ppv + tpr)
    return UtilityMetrics(
        tpr=tpr,
        fpr=_ratio(fp, fp + tn),
        ppv=ppv,
        npv=_ratio(tn, tn + fn),
        f1=f1,
        predicted_positive_rate=_ratio(tp + fp, counts.total),
        vdr=_ratio(counts.tp_value, counts.tp_value + counts.fn_value),
    )


def fp_ratio(counts: ConfusionCounts) -> Optional[float]:
    """False positives per true positive; undefined when nothing is caught."""
    return _ratio(counts.fp, counts.tp)


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with tied scores sharing their mean rank."""
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    return (upper - (counts - 1) / 2.0)[inverse]


def roc_auc(y_true, y_score) -> Optional[float]:
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counting one half."""
    y, s, _ = _arrays(y_true, y_score)
    n_pos = int(np.count_nonzero(y))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return Undefined
    rank_sum = _average_ranks(s)[y].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pr_auc(y_true, y_score) -> Optional[float]:
    """Average precision over positives ranked by (score desc, label desc, input order)."""
    y, s, _ = _arrays(y_true, y_score)
    n_pos = int(np.count_nonzero(y))
    if n_pos == 0:
        return Undefined
    order = np.lexsort((np.arange(len(s)), ~y, -s))
    hits = y[order]
    cum_tp = np.cumsum(hits)
    ranks = np.flatnonzero(hits) + 1
    return float(np.sum(cum_tp[hits] / ranks) / n_pos)


@dataclass(frozen=True)
class FPRatioSweep:
    """Cumulative counts at every distinct score used as a threshold, highest first."""

    thresholds: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    tp_value: np.ndarray
    n_pos: int
    total_value: float

    @classmethod
    def from_scores(cls, y_true, y_score, values=None) -> "FPRatioSweep":
        y, s, v = _arrays(y_true, y_score, values)
        n_pos = int(np.count_nonzero(y))
        if n_pos == 0:
            raise NoPositivesError("threshold search needs at least one positive label")
        order = np.argsort(-s, kind="stable")
        s_sorted = s[order]
        y_sorted = y[order]
        ends = np.flatnonzero(np.append(s_sorted[1:] != s_sorted[:-1], True))
        cum_tp = np.cumsum(y_sorted)
        cum_fp = np.arange(1, len(s) + 1) - cum_tp
        cum_val = np.cumsum(np.where(y_sorted, v[order], 0.0))
        return cls(
            thresholds=s_sorted[ends],
            tp=cum_tp[ends],
            fp=cum_fp[ends],
            tp_value=cum_val[ends],
            n_pos=n_pos,
            total_value=float(v[y].sum()),
        )

    def search(self, target: float) -> ThresholdSearchResult:
        """Highest-TPR threshold with FP/TP <= target; ties go to the higher threshold."""
        if not target >= 0:
            raise ValueError(f"target FP ratio must be >= 0, got {target}")
        caught = self.tp > 0
        ratio = np.full(len(self.tp), np.inf)
        np.divide(self.fp, self.tp, out=ratio, where=caught)
        ok = caught & (ratio <= target)
        if ok.any():
            best_tp = self.tp[ok].max()
            idx = int(np.flatnonzero(ok & (self.tp == best_tp))[0])
            feasible = True
        else:
            idx = len(self.tp) - 1
            feasible = False
        tp = int(self.tp[idx])
        fp = int(self.fp[idx])
        vdr = _ratio(self.tp_value[idx], self.total_value)
        return ThresholdSearchResult(
            threshold=float(self.thresholds[idx]),
            achieved_fp_ratio=_ratio(fp, tp),
            tpr_at_threshold=tp / self.n_pos,
            feasible=feasible,
            target=float(target),
            vdr_at_threshold=vdr,
            tp=tp,
            fp=fp,
        )


def threshold_for_fp_ratio(y_true, y_score, target: float, values=None) -> ThresholdSearchResult:
    """Find the score threshold that catches the most fraud at FP/TP <= ``target``.

    Candidate thresholds are the distinct scores. When no candidate satisfies
    the constraint the result is flagged infeasible and carries the stats of
    the lowest threshold (everything predicted fraud).

    >>> r = threshold_for_fp_ratio([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.6], 1.0)
    >>> r.threshold, r.achieved_fp_ratio, r.tpr_at_threshold
    (0.7, 0.5, 1.0)
    """
    return FPRatioSweep.from_scores(y_true, y_score, values).search(target)


def tpr_at_fp_ratio(y_true, y_score, target: float) -> Optional[float]:
    result = threshold_for_fp_ratio(y_true, y_score, target)
    return result.tpr_at_threshold if result.feasible else Undefined


def vdr_at_fp_ratio(y_true, y_score, values, target: float) -> Optional[float]:
    result = threshold_for_fp_ratio(y_true, y_score, target, values)
    return result.vdr_at_threshold if result.feasible else Undefined
