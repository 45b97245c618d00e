"""Parity metrics between the two gender groups.

A parity is the absolute gap ``|m - f|`` of a utility metric between groups;
its normalised form divides by ``max(m, f)`` so gaps between small rates
(typical under heavy class imbalance) are not hidden.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .exceptions import UnknownMetricError
from .metrics import UtilityMetrics

DEFAULT_BIAS_THRESHOLD = 0.05


class Grouping(str, Enum):
    PROTECTION = "Protection"
    QOS = "QoS"
    COMBINED = "Combined"
    PROTECTION_AT_FIXED_QOS = "ProtectionAtFixedQoS"
    DATASET = "Dataset"


_GROUPING = {
    "tpr_parity": Grouping.PROTECTION,
    "vdr_parity": Grouping.PROTECTION,
    "npv_parity": Grouping.PROTECTION,
    "ppv_parity": Grouping.QOS,
    "fpr_parity": Grouping.QOS,
    # FP ratio is false alarms per caught fraud: a service-quality quantity
    "fp_ratio_parity": Grouping.QOS,
    "f1_parity": Grouping.COMBINED,
    "equalized_odds": Grouping.COMBINED,
    "demographic_parity": Grouping.COMBINED,
    "roc_auc_parity": Grouping.COMBINED,
    "pr_auc_parity": Grouping.COMBINED,
    "tpr_at_fp_ratio_parity": Grouping.PROTECTION_AT_FIXED_QOS,
    "vdr_at_fp_ratio_parity": Grouping.PROTECTION_AT_FIXED_QOS,
    "true_fraud_rate_parity": Grouping.DATASET,
}

_ALIASES = {
    "recall_parity": "tpr_parity",
    "equal_opportunity": "tpr_parity",
    "precision_parity": "ppv_parity",
    "f1_score_parity": "f1_parity",
    "equalized_odds_parity": "equalized_odds",
    "demographic_parity_parity": "demographic_parity",
}

METRIC_NAMES = tuple(_GROUPING)
GLOBAL_METRICS = (
    "tpr_parity", "vdr_parity", "npv_parity", "ppv_parity", "fpr_parity", "f1_parity",
    "equalized_odds", "demographic_parity", "roc_auc_parity", "pr_auc_parity", "fp_ratio_parity",
)
GROUPWISE_METRICS = ("tpr_at_fp_ratio_parity", "vdr_at_fp_ratio_parity")


def canonical_metric(name: str) -> str:
    key = name.strip().lower().replace("-", "_").replace(" ", "_")
    key = _ALIASES.get(key, key)
    if key not in _GROUPING:
        raise UnknownMetricError(f"unknown metric {name!r}; known: {', '.join(METRIC_NAMES)}")
    return key


def metric_grouping(metric_name: str) -> Grouping:
    return _GROUPING[canonical_metric(metric_name)]


@dataclass(frozen=True)
class BiasPolicy:
    bias_threshold: float = DEFAULT_BIAS_THRESHOLD
    normalization: str = "max"

    def __post_init__(self):
        if not self.bias_threshold > 0:
            raise ValueError(f"bias_threshold must be > 0, got {self.bias_threshold}")
        if self.normalization != "max":
            raise ValueError(f"unsupported normalization {self.normalization!r}")

    def flags(self, value: Optional[float]) -> bool:
        return value is not None and value > self.bias_threshold


@dataclass(frozen=True)
class ParityValue:
    metric_name: str
    raw: Optional[float]
    normalized: Optional[float]
    group_values: dict = field(default_factory=dict)
    grouping: Grouping = Grouping.COMBINED
    significant_raw: bool = False
    significant_normalized: bool = False
    fp_ratio: Optional[float] = None

    def to_dict(self):
        return {
            "metric_name": self.metric_name,
            "raw": self.raw,
            "normalized": self.normalized,
            "group_values": dict(self.group_values),
            "grouping": self.grouping.value,
            "significant_raw": self.significant_raw,
            "significant_normalized": self.significant_normalized,
            "fp_ratio": self.fp_ratio,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            metric_name=data["metric_name"],
            raw=data.get("raw"),
            normalized=data.get("normalized"),
            group_values=dict(data.get("group_values", {})),
            grouping=Grouping(data.get("grouping", "Combined")),
            significant_raw=bool(data.get("significant_raw", False)),
            significant_normalized=bool(data.get("significant_normalized", False)),
            fp_ratio=data.get("fp_ratio"),
        )

    @property
    def key(self):
        return (self.metric_name, self.fp_ratio)


def _gap(m, f):
    if m is None or f is None:
        return None, None
    raw = abs(m - f)
    top = max(m, f)
    return raw, (raw / top if top != 0 else None)


def parity(metric_name, value_male, value_female, policy=BiasPolicy(), grouping=None, fp_ratio=None) -> ParityValue:
    """Raw and max-normalised absolute gap between the male and female values.

    >>> p = parity("tpr_parity", 0.9, 0.8)
    >>> round(p.raw, 12), round(p.normalized, 12)
    (0.1, 0.111111111111)
    """
    raw, normalized = _gap(value_male, value_female)
    if grouping is None:
        grouping = metric_grouping(metric_name)
    return ParityValue(
        metric_name=metric_name,
        raw=raw,
        normalized=normalized,
        group_values={"M": value_male, "F": value_female},
        grouping=grouping,
        significant_raw=policy.flags(raw),
        significant_normalized=policy.flags(normalized),
        fp_ratio=fp_ratio,
    )


def equalized_odds(utilities_male: UtilityMetrics, utilities_female: UtilityMetrics,
                   policy=BiasPolicy()) -> ParityValue:
    """Sum of TPR and FPR gaps; the normalised form averages the two normalised gaps."""
    tpr_raw, tpr_norm = _gap(utilities_male.tpr, utilities_female.tpr)
    fpr_raw, fpr_norm = _gap(utilities_male.fpr, utilities_female.fpr)
    raw = None if tpr_raw is None or fpr_raw is None else tpr_raw + fpr_raw
    normalized = None if tpr_norm is None or fpr_norm is None else (tpr_norm + fpr_norm) / 2.0
    return ParityValue(
        metric_name="equalized_odds",
        raw=raw,
        normalized=normalized,
        group_values={
            "M": {"tpr": utilities_male.tpr, "fpr": utilities_male.fpr},
            "F": {"tpr": utilities_female.tpr, "fpr": utilities_female.fpr},
        },
        grouping=Grouping.COMBINED,
        significant_raw=policy.flags(raw),
        significant_normalized=policy.flags(normalized),
    )


def demographic_parity(utilities_male: UtilityMetrics, utilities_female: UtilityMetrics,
                       policy=BiasPolicy()) -> ParityValue:
    return parity("demographic_parity", utilities_male.predicted_positive_rate,
                  utilities_female.predicted_positive_rate, policy)
