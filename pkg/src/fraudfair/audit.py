"""Bias audits over scored transactions.

Two measurement regimes are supported:

``global``
    One score threshold is chosen on the pooled data at a target FP ratio
    (false positives per true positive); every group is evaluated at it.
``groupwise``
    Each group gets its own threshold achieving the same FP ratio, so
    fraud protection is compared at equal quality of service. Run over a
    grid of ratios this yields parity-versus-ratio curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import EmptyGroupError, InvalidConfigError, MismatchedConfigsError, NoPositivesError
from .metrics import (
    ConfusionCounts,
    FPRatioSweep,
    UtilityMetrics,
    confusion_counts,
    fp_ratio,
    pr_auc,
    roc_auc,
    utility_metrics,
)
from .parity import (
    GLOBAL_METRICS,
    METRIC_NAMES,
    BiasPolicy,
    Grouping,
    ParityValue,
    canonical_metric,
    demographic_parity,
    equalized_odds,
    parity,
)
from .records import GROUPS, ScoredBatch
from .serialize import dumps

GLOBAL = "global"
GROUPWISE = "groupwise"
_MODE_NAMES = {GLOBAL: "GlobalThreshold", GROUPWISE: "GroupwiseThreshold"}
DEFAULT_FP_RATIO = 5.0
DEFAULT_FP_RATIO_GRID = (5.0, 2.0, 1.0, 0.5)

REPORT_METADATA = {
    "vdr_value": "gross_amount",
    "pr_auc": "average_precision",
    "normalized_eo": "mean",
    "normalization": "max",
    "binarization": "score >= threshold",
    "threshold_rule": "max TPR subject to FP/TP <= target; ties to the higher threshold",
    "undefined": "null",
}


def _normalize_mode(mode: str) -> str:
    key = str(mode).strip().lower()
    for name, long_name in _MODE_NAMES.items():
        if key in (name, long_name.lower()):
            return name
    raise InvalidConfigError(f"mode must be 'global' or 'groupwise', got {mode!r}")


@dataclass(frozen=True)
class AuditConfig:
    mode: str = GLOBAL
    global_fp_ratio: float = DEFAULT_FP_RATIO
    fp_ratio_grid: tuple = DEFAULT_FP_RATIO_GRID
    policy: BiasPolicy = field(default_factory=BiasPolicy)
    enabled_metrics: frozenset = frozenset(METRIC_NAMES)

    def __post_init__(self):
        object.__setattr__(self, "mode", _normalize_mode(self.mode))
        if not (self.global_fp_ratio > 0 and math.isfinite(self.global_fp_ratio)):
            raise InvalidConfigError(f"global_fp_ratio must be a positive number, got {self.global_fp_ratio}")
        grid = tuple(float(r) for r in self.fp_ratio_grid)
        if not grid:
            raise InvalidConfigError("fp_ratio_grid is empty")
        if any(not (r > 0 and math.isfinite(r)) for r in grid):
            raise InvalidConfigError(f"fp_ratio_grid must be strictly positive, got {grid}")
        if len(set(grid)) != len(grid):
            raise InvalidConfigError(f"fp_ratio_grid has duplicates: {grid}")
        object.__setattr__(self, "fp_ratio_grid", grid)
        try:
            enabled = frozenset(canonical_metric(m) for m in self.enabled_metrics)
        except KeyError as exc:
            raise InvalidConfigError(str(exc)) from exc
        object.__setattr__(self, "enabled_metrics", enabled)

    def to_dict(self):
        return {
            "mode": _MODE_NAMES[self.mode],
            "global_fp_ratio": self.global_fp_ratio,
            "fp_ratio_grid": list(self.fp_ratio_grid),
            "bias_threshold": self.policy.bias_threshold,
            "normalization": self.policy.normalization,
            "enabled_metrics": sorted(self.enabled_metrics),
        }

    @classmethod
    def from_dict(cls, data) -> "AuditConfig":
        return cls(
            mode=data.get("mode", GLOBAL),
            global_fp_ratio=float(data.get("global_fp_ratio", DEFAULT_FP_RATIO)),
            fp_ratio_grid=tuple(data.get("fp_ratio_grid", DEFAULT_FP_RATIO_GRID)),
            policy=BiasPolicy(float(data.get("bias_threshold", 0.05)), data.get("normalization", "max")),
            enabled_metrics=frozenset(data.get("enabled_metrics", METRIC_NAMES)),
        )

    def replace(self, **changes) -> "AuditConfig":
        values = dict(mode=self.mode, global_fp_ratio=self.global_fp_ratio, fp_ratio_grid=self.fp_ratio_grid,
                      policy=self.policy, enabled_metrics=self.enabled_metrics)
        values.update(changes)
        return AuditConfig(**values)


@dataclass
class AuditReport:
    mode: str
    fp_ratio_targets: list
    thresholds: dict
    threshold_feasible: dict
    parities: list
    per_group_utilities: dict
    confusion: dict
    dataset_stats: dict
    config: dict
    metadata: dict = field(default_factory=lambda: dict(REPORT_METADATA))
    errors: dict = field(default_factory=dict)
    sweep: list = field(default_factory=list)
    run_aggregate: Optional[dict] = None

    def parity(self, metric_name: str, fp_ratio: Optional[float] = None) -> ParityValue:
        name = canonical_metric(metric_name)
        for p in self.parities:
            if p.metric_name == name and (fp_ratio is None or p.fp_ratio == fp_ratio):
                return p
        raise KeyError(f"report has no parity {name!r} at fp_ratio={fp_ratio}")

    @property
    def bias_found(self) -> bool:
        """True when any reported normalised parity exceeds the bias threshold."""
        return any(p.significant_normalized for p in self.parities)

    def to_dict(self):
        return {
            "mode": _MODE_NAMES[self.mode],
            "fp_ratio_targets": list(self.fp_ratio_targets),
            "chosen_thresholds": self.thresholds,
            "threshold_feasible": self.threshold_feasible,
            "parities": [p.to_dict() for p in self.parities],
            "per_group_utilities": {g: u.to_dict() for g, u in self.per_group_utilities.items()},
            "confusion": {g: c.to_dict() for g, c in self.confusion.items()},
            "dataset_stats": self.dataset_stats,
            "sweep": self.sweep,
            "errors": self.errors,
            "run_aggregate": self.run_aggregate,
            "config": self.config,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data) -> "AuditReport":
        return cls(
            mode=_normalize_mode(data["mode"]),
            fp_ratio_targets=list(data["fp_ratio_targets"]),
            thresholds=data["chosen_thresholds"],
            threshold_feasible=data["threshold_feasible"],
            parities=[ParityValue.from_dict(p) for p in data["parities"]],
            per_group_utilities={g: UtilityMetrics.from_dict(u) for g, u in data["per_group_utilities"].items()},
            confusion={g: ConfusionCounts(**c) for g, c in data["confusion"].items()},
            dataset_stats=data["dataset_stats"],
            config=data["config"],
            metadata=data.get("metadata", {}),
            errors=data.get("errors", {}),
            sweep=data.get("sweep", []),
            run_aggregate=data.get("run_aggregate"),
        )

    def flat_rows(self):
        """(metric, fp_ratio, group_a_value, group_b_value, raw, normalized, significant) rows."""
        rows = []
        for p in self.parities:
            gm, gf = p.group_values.get("M"), p.group_values.get("F")
            if isinstance(gm, dict):
                gm = gf = None
            rows.append({
                "metric": p.metric_name,
                "fp_ratio": p.fp_ratio,
                "group_a_value": gm,
                "group_b_value": gf,
                "raw": p.raw,
                "normalized": p.normalized,
                "significant": p.significant_normalized,
            })
        return rows


def split_by_group(batch: ScoredBatch) -> dict:
    """Partition a batch by group, preserving input order; absent groups map to empty batches."""
    return {g: batch.take(np.flatnonzero(batch.group == g)) for g in GROUPS}


def dataset_bias(batch: ScoredBatch, policy: BiasPolicy = BiasPolicy()) -> ParityValue:
    """Parity of the true fraud rates themselves (bias present before any model)."""
    parts = split_by_group(batch)
    rates = {}
    for g, part in parts.items():
        if len(part) == 0:
            raise EmptyGroupError(f"group {g} has no records")
        rates[g] = float(np.count_nonzero(part.label)) / len(part)
    return parity("true_fraud_rate_parity", rates["M"], rates["F"], policy, grouping=Grouping.DATASET)


def _dataset_stats(parts: dict, policy: BiasPolicy) -> dict:
    n = {g: len(p) for g, p in parts.items()}
    frauds = {g: int(np.count_nonzero(p.label)) for g, p in parts.items()}
    total = sum(n.values())
    stats = {
        "n_records": {**n, "total": total},
        "n_fraud": {**frauds, "total": sum(frauds.values())},
        "fraud_rate": {
            **{g: (frauds[g] / n[g] if n[g] else None) for g in GROUPS},
            "total": (sum(frauds.values()) / total if total else None),
        },
    }
    try:
        stats["true_fraud_rate_parity"] = dataset_bias(ScoredBatch.concat(parts.values()), policy).to_dict()
    except EmptyGroupError:
        stats["true_fraud_rate_parity"] = None
    return stats


def _auc_or_none(fn, part: ScoredBatch):
    return fn(part.label, part.score) if len(part) else None


def audit_global(batch: ScoredBatch, config: AuditConfig = AuditConfig()) -> AuditReport:
    """Audit every group at one threshold chosen on the pooled data."""
    config = config.replace(mode=GLOBAL) if config.mode != GLOBAL else config
    policy = config.policy
    sweep = FPRatioSweep.from_scores(batch.label, batch.score, batch.value)
    choice = sweep.search(config.global_fp_ratio)
    tau = choice.threshold
    parts = split_by_group(batch)

    counts = {g: confusion_counts(p.label, p.score, tau, p.value) for g, p in parts.items()}
    utils = {g: utility_metrics(c) for g, c in counts.items()}
    um, uf = utils["M"], utils["F"]
    candidates = {
        "tpr_parity": lambda: parity("tpr_parity", um.tpr, uf.tpr, policy),
        "vdr_parity": lambda: parity("vdr_parity", um.vdr, uf.vdr, policy),
        "npv_parity": lambda: parity("npv_parity", um.npv, uf.npv, policy),
        "ppv_parity": lambda: parity("ppv_parity", um.ppv, uf.ppv, policy),
        "fpr_parity": lambda: parity("fpr_parity", um.fpr, uf.fpr, policy),
        "f1_parity": lambda: parity("f1_parity", um.f1, uf.f1, policy),
        "equalized_odds": lambda: equalized_odds(um, uf, policy),
        "demographic_parity": lambda: demographic_parity(um, uf, policy),
        "roc_auc_parity": lambda: parity("roc_auc_parity", _auc_or_none(roc_auc, parts["M"]),
                                         _auc_or_none(roc_auc, parts["F"]), policy),
        "pr_auc_parity": lambda: parity("pr_auc_parity", _auc_or_none(pr_auc, parts["M"]),
                                        _auc_or_none(pr_auc, parts["F"]), policy),
        "fp_ratio_parity": lambda: parity("fp_ratio_parity", fp_ratio(counts["M"]), fp_ratio(counts["F"]), policy),
    }
    parities = [candidates[name]() for name in GLOBAL_METRICS if name in config.enabled_metrics]
    confusion = dict(counts)
    confusion["pooled"] = counts["M"] + counts["F"]

    return AuditReport(
        mode=GLOBAL,
        fp_ratio_targets=[config.global_fp_ratio],
        thresholds={"pooled": [tau]},
        threshold_feasible={"pooled": [choice.feasible]},
        parities=parities,
        per_group_utilities=utils,
        confusion=confusion,
        dataset_stats=_dataset_stats(parts, policy),
        config=config.to_dict(),
        sweep=[{"fp_ratio": config.global_fp_ratio, "groups": {"pooled": choice.to_dict()}}],
    )


def audit_groupwise(batch: ScoredBatch, config: AuditConfig = AuditConfig(mode=GROUPWISE)) -> AuditReport:
    """Per-group thresholds at each FP ratio of the grid; TPR and VDR parity per point."""
    config = config.replace(mode=GROUPWISE) if config.mode != GROUPWISE else config
    policy = config.policy
    parts = split_by_group(batch)
    sweeps, errors = {}, {}
    for g, part in parts.items():
        try:
            sweeps[g] = FPRatioSweep.from_scores(part.label, part.score, part.value)
        except NoPositivesError as exc:
            errors[g] = f"NoPositives: {exc}"
    if len(errors) == len(GROUPS):
        raise NoPositivesError("no group has any positive label")

    thresholds = {g: [] for g in GROUPS}
    feasible = {g: [] for g in GROUPS}
    parities, points = [], []
    for ratio in config.fp_ratio_grid:
        results = {g: (sweeps[g].search(ratio) if g in sweeps else None) for g in GROUPS}
        tpr, vdr = {}, {}
        for g, res in results.items():
            thresholds[g].append(res.threshold if res else None)
            feasible[g].append(bool(res and res.feasible))
            tpr[g] = res.tpr_at_threshold if res and res.feasible else None
            vdr[g] = res.vdr_at_threshold if res and res.feasible else None
        if "tpr_at_fp_ratio_parity" in config.enabled_metrics:
            parities.append(parity("tpr_at_fp_ratio_parity", tpr["M"], tpr["F"], policy, fp_ratio=ratio))
        if "vdr_at_fp_ratio_parity" in config.enabled_metrics:
            parities.append(parity("vdr_at_fp_ratio_parity", vdr["M"], vdr["F"], policy, fp_ratio=ratio))
        points.append({"fp_ratio": ratio,
                       "groups": {g: (r.to_dict() if r else None) for g, r in results.items()}})

    first = config.fp_ratio_grid[0]
    counts, utils = {}, {}
    for g, part in parts.items():
        # a group without positives has no threshold: nothing is flagged
        tau = thresholds[g][0] if thresholds[g][0] is not None else np.inf
        counts[g] = confusion_counts(part.label, part.score, tau, part.value)
        utils[g] = utility_metrics(counts[g])

    return AuditReport(
        mode=GROUPWISE,
        fp_ratio_targets=list(config.fp_ratio_grid),
        thresholds=thresholds,
        threshold_feasible=feasible,
        parities=parities,
        per_group_utilities=utils,
        confusion=counts,
        dataset_stats=_dataset_stats(parts, policy),
        config=config.to_dict(),
        errors=errors,
        sweep=points,
        metadata={**REPORT_METADATA, "per_group_utilities_at_fp_ratio": first},
    )


def run_audit(batch: ScoredBatch, config: AuditConfig = AuditConfig()) -> AuditReport:
    if config.mode == GLOBAL:
        return audit_global(batch, config)
    return audit_groupwise(batch, config)


# ---------------------------------------------------------------------------
# multi-run aggregation


def _stats(values: Sequence, with_std: bool) -> dict:
    defined = [float(v) for v in values if v is not None]
    out = {"mean": (float(np.mean(defined)) if defined else None), "n": len(defined),
           "excluded": len(values) - len(defined)}
    if with_std:
        out["std"] = float(np.std(defined)) if defined else None
    return out


def _mean_nested(values: Sequence):
    if values and isinstance(values[0], dict):
        return {k: _mean_nested([v.get(k) for v in values]) for k in values[0]}
    defined = [float(v) for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def aggregate_runs(reports: Sequence[AuditReport]) -> AuditReport:
    """Mean and population std of every parity across runs (e.g. scorer seeds).

    Undefined values are left out of the statistics and counted in
    ``excluded``. The returned report's parities and utilities hold the
    across-run means; per-run thresholds are kept in ``run_aggregate``.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("aggregate_runs needs at least one report")
    base = reports[0]
    for r in reports[1:]:
        if r.config != base.config or r.mode != base.mode:
            raise MismatchedConfigsError("reports were produced with different audit configurations")
        if [p.key for p in r.parities] != [p.key for p in base.parities]:
            raise MismatchedConfigsError("reports cover different parity metrics")
    policy = BiasPolicy(base.config["bias_threshold"], base.config["normalization"])
    with_std = len(reports) > 1

    summary, mean_parities = [], []
    for i, p in enumerate(base.parities):
        column = [r.parities[i] for r in reports]
        raw = _stats([c.raw for c in column], with_std)
        norm = _stats([c.normalized for c in column], with_std)
        summary.append({"metric_name": p.metric_name, "fp_ratio": p.fp_ratio, "grouping": p.grouping.value,
                        "raw": raw, "normalized": norm})
        mean_parities.append(ParityValue(
            metric_name=p.metric_name,
            raw=raw["mean"],
            normalized=norm["mean"],
            group_values=_mean_nested([c.group_values for c in column]),
            grouping=p.grouping,
            significant_raw=policy.flags(raw["mean"]),
            significant_normalized=policy.flags(norm["mean"]),
            fp_ratio=p.fp_ratio,
        ))

    utils = {
        g: UtilityMetrics(**_mean_nested([r.per_group_utilities[g].to_dict() for r in reports]))
        for g in base.per_group_utilities
    }
    thresholds = {g: [_mean_nested([r.thresholds[g][k] for r in reports]) for k in range(len(base.thresholds[g]))]
                  for g in base.thresholds}
    feasible = {g: [all(r.threshold_feasible[g][k] for r in reports) for k in range(len(base.threshold_feasible[g]))]
                for g in base.threshold_feasible}
    confusion = {}
    for g in base.confusion:
        fields_ = base.confusion[g].to_dict()
        confusion[g] = ConfusionCounts(**{
            k: (int(round(np.mean([r.confusion[g].to_dict()[k] for r in reports])))
                if isinstance(v, int) else float(np.mean([r.confusion[g].to_dict()[k] for r in reports])))
            for k, v in fields_.items()
        })

    return AuditReport(
        mode=base.mode,
        fp_ratio_targets=list(base.fp_ratio_targets),
        thresholds=thresholds,
        threshold_feasible=feasible,
        parities=mean_parities,
        per_group_utilities=utils,
        confusion=confusion,
        dataset_stats=base.dataset_stats,
        config=base.config,
        metadata={**base.metadata, "aggregation": "mean over runs; population std; undefined values excluded"},
        errors={g: m for r in reports for g, m in r.errors.items()},
        sweep=[],
        run_aggregate={
            "n_runs": len(reports),
            "parities": summary,
            "thresholds_per_run": [r.thresholds for r in reports],
        },
    )


# ---------------------------------------------------------------------------
# estimator front end


class FairnessAuditor(BaseEstimator):
    """Estimator-style wrapper around :func:`audit_global` / :func:`audit_groupwise`.

    Parameters
    ----------
    mode : {"global", "groupwise"}
    fp_ratio : float
        Target FP ratio for the global threshold.
    fp_ratio_grid : sequence of float
        Ratios evaluated in groupwise mode, in reporting order.
    bias_threshold : float
        Parities strictly above this are flagged significant.
    metrics : iterable of str or None
        Parity metrics to compute; ``None`` enables all of them.

    Attributes
    ----------
    report_ : AuditReport
    bias_found_ : bool
    """

    def __init__(self, mode="global", fp_ratio=DEFAULT_FP_RATIO, fp_ratio_grid=DEFAULT_FP_RATIO_GRID,
                 bias_threshold=0.05, metrics=None):
        self.mode = mode
        self.fp_ratio = fp_ratio
        self.fp_ratio_grid = fp_ratio_grid
        self.bias_threshold = bias_threshold
        self.metrics = metrics

    def _config(self) -> AuditConfig:
        return AuditConfig(
            mode=self.mode,
            global_fp_ratio=float(self.fp_ratio),
            fp_ratio_grid=tuple(self.fp_ratio_grid),
            policy=BiasPolicy(float(self.bias_threshold)),
            enabled_metrics=frozenset(METRIC_NAMES if self.metrics is None else self.metrics),
        )

    def fit(self, y_true, y_score, groups, values=None):
        batch = ScoredBatch.from_arrays(y_score, y_true, groups, values)
        self.report_ = run_audit(batch, self._config())
        self.bias_found_ = self.report_.bias_found
        return self

    def fit_batch(self, batch: ScoredBatch):
        self.report_ = run_audit(batch, self._config())
        self.bias_found_ = self.report_.bias_found
        return self
