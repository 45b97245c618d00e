"""Group-fairness bias audits for binary transaction-fraud classifiers."""

__version__ = "0.1.0"

from .audit import (
    AuditConfig,
    AuditReport,
    FairnessAuditor,
    aggregate_runs,
    audit_global,
    audit_groupwise,
    dataset_bias,
    split_by_group,
)
from .metrics import (
    ConfusionCounts,
    ThresholdSearchResult,
    UtilityMetrics,
    confusion_counts,
    fp_ratio,
    pr_auc,
    roc_auc,
    threshold_for_fp_ratio,
    tpr_at_fp_ratio,
    utility_metrics,
    vdr_at_fp_ratio,
)
from .parity import BiasPolicy, Grouping, ParityValue, demographic_parity, equalized_odds, metric_grouping, parity
from .records import ScoredBatch, ScoredRecord, TransactionRecord, TransactionTable, validate_records
from .features import FeatureConfig, FeatureMatrix, TransactionFeaturizer, build_feature_matrix, rolling_aggregates
from .pipeline import ExperimentConfig, run_experiment
from .scorer import LogisticScorer, downsample_negatives
from .synthgen import GeneratorConfig, ScoredPopulationConfig, generate, generate_scored, summarize

__all__ = [name for name in dir() if not name.startswith("_")]
