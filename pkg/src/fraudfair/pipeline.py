"""End-to-end experiment: generate, featurise, downsample, train, score, audit.

Every run trains two scorers on the same data, one with the gender column
(standard ERM) and one without it (fairness through unawareness), and
audits both on a held-out set of cards under the global and group-wise
threshold regimes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .audit import GLOBAL, GROUPWISE, AuditConfig, AuditReport, aggregate_runs, run_audit
from .exceptions import InvalidConfigError
from .features import FeatureConfig, TransactionFeaturizer
from .records import ScoredBatch, TransactionTable
from .scorer import LogisticScorer, downsample_negatives
from .synthgen import GeneratorConfig, generate

STANDARD = "standard"
UNAWARE = "unaware"
VARIANTS = (STANDARD, UNAWARE)
DOWNSAMPLE_RATE = 0.0478


def _default_scorer():
    return {"learning_rate": 0.1, "epochs": 300, "l2": 1e-4, "class_weight": "balanced"}


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    scorer: dict = field(default_factory=_default_scorer)
    downsample_rate: float = DOWNSAMPLE_RATE
    test_fraction: float = 0.5
    global_audit: AuditConfig = field(default_factory=lambda: AuditConfig(mode=GLOBAL))
    groupwise_audit: AuditConfig = field(default_factory=lambda: AuditConfig(mode=GROUPWISE))
    seeds: tuple = tuple(range(10))

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise InvalidConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if not 0 < self.downsample_rate < 1:
            raise InvalidConfigError(f"downsample_rate must be in (0, 1), got {self.downsample_rate}")
        if not self.seeds:
            raise InvalidConfigError("at least one seed is required")
        unknown = set(self.scorer) - set(_default_scorer())
        if unknown:
            raise InvalidConfigError(f"unknown scorer settings {sorted(unknown)}")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "scorer", {**_default_scorer(), **self.scorer})

    def to_dict(self):
        return {
            "generator": self.generator.to_dict(),
            "features": self.features.to_dict(),
            "scorer": dict(self.scorer),
            "downsample_rate": self.downsample_rate,
            "test_fraction": self.test_fraction,
            "global_audit": self.global_audit.to_dict(),
            "groupwise_audit": self.groupwise_audit.to_dict(),
            "seeds": list(self.seeds),
        }

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise InvalidConfigError(f"unknown experiment settings {sorted(unknown)}")
        kwargs = dict(data)
        if "generator" in kwargs:
            kwargs["generator"] = GeneratorConfig.from_dict(kwargs["generator"])
        if "features" in kwargs:
            kwargs["features"] = FeatureConfig.from_dict(kwargs["features"])
        for key, mode in (("global_audit", GLOBAL), ("groupwise_audit", GROUPWISE)):
            if key in kwargs:
                kwargs[key] = AuditConfig.from_dict({**kwargs[key], "mode": mode})
        if "seeds" in kwargs:
            kwargs["seeds"] = tuple(kwargs["seeds"])
        return cls(**kwargs)

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def split_by_card(table: TransactionTable, test_fraction: float, seed: int):
    """Disjoint train/test partitions with no cardholder in both."""
    cards = np.unique(table.card_id)
    rng = np.random.default_rng(seed)
    test_cards = rng.choice(cards, size=int(round(len(cards) * test_fraction)), replace=False)
    in_test = np.isin(table.card_id, test_cards)
    return table.take(np.flatnonzero(~in_test)), table.take(np.flatnonzero(in_test))


def _scored(table: TransactionTable, scores) -> ScoredBatch:
    return ScoredBatch(score=np.asarray(scores, dtype=float), label=table.label.astype(np.int8),
                       group=table.gender, value=table.amount, card_id=table.card_id)


def train_and_score(train: TransactionTable, test: TransactionTable, config: ExperimentConfig, seed: int):
    """Scored test batches for both variants; the seed drives downsampling and scorer init.

    Both variants share one featurisation: dropping the gender column gives
    exactly the unaware feature matrix.
    """
    features = replace(config.features, include_gender=True)
    featurizer = TransactionFeaturizer(features.windows, True, features.interaction_keys,
                                       features.smoothing).fit(train)
    X_train, X_test = featurizer.transform(train), featurizer.transform(test)
    names = list(featurizer.get_feature_names_out())
    gender_col = names.index("gender")

    keep = downsample_negatives(train.label, config.downsample_rate, seed)
    out = {}
    for variant in VARIANTS:
        cols = np.arange(len(names)) if variant == STANDARD else np.delete(np.arange(len(names)), gender_col)
        model = LogisticScorer(seed=seed, **config.scorer).fit(
            X_train[keep][:, cols], train.label[keep], feature_names=[names[c] for c in cols])
        out[variant] = (model, _scored(test, model.predict_proba(X_test[:, cols])[:, 1]))
    return out


def run_experiment(config: ExperimentConfig, seed: int, table: TransactionTable | None = None) -> dict:
    """One run: ``{variant: {"global": report, "groupwise": report}}``.

    Without ``table`` a fresh world is generated from ``seed``; the card
    split reuses the generator seed so a fixed world keeps a fixed split.
    """
    if table is None:
        gen = config.generator.replace(seed=seed)
        table = generate(gen)
    else:
        gen = config.generator
    train, test = split_by_card(table, config.test_fraction, gen.seed)
    scored = train_and_score(train, test, config, seed)
    return {
        variant: {GLOBAL: run_audit(batch, config.global_audit), GROUPWISE: run_audit(batch, config.groupwise_audit)}
        for variant, (_, batch) in scored.items()
    }


def aggregate_experiments(runs) -> dict:
    """Fold per-seed runs into ``{variant: {mode: aggregated report}}``."""
    runs = list(runs)
    return {
        variant: {mode: aggregate_runs([r[variant][mode] for r in runs]) for mode in (GLOBAL, GROUPWISE)}
        for variant in VARIANTS
    }


def report_bundle(aggregated: dict) -> dict:
    return {variant: {mode: report.to_dict() for mode, report in modes.items()}
            for variant, modes in aggregated.items()}


def groupwise_parity(report: AuditReport, metric: str, ratio: float):
    return report.parity(metric, ratio).normalized
