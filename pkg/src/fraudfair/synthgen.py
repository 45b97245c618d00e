"""Seeded synthetic card-transaction worlds with controllable gender effects.

Each card gets a gender, a merchant-code preference, a transaction rate and
its own sub-seed, so cards can be generated independently and merged in a
fixed order. Two knobs matter for fairness experiments:

``fraud_rate_gender_gap``
    multiplies the per-transaction fraud probability of ``gap_gender``.
``proxy_strength``
    blends each card's personal merchant-code preference with a preference
    shared by its gender (0 = merchant codes carry no gender signal, 1 =
    codes are drawn from the gender's profile only).

Merchant-code fraud risk is constructed so that the two gender profiles
have the same expected risk; the gender fraud-rate gap therefore comes only
from ``fraud_rate_gender_gap``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .exceptions import InvalidConfigError
from .features import DAY
from .parity import BiasPolicy, Grouping, parity
from .records import GROUPS, ScoredBatch, TransactionTable, validate_records

START_EPOCH = 1_546_300_800  # 2019-01-01T00:00:00Z

# relative hourly activity (index = hour of day)
GENUINE_HOURS = np.array([1, 0.6, 0.4, 0.3, 0.3, 0.5, 1.2, 2.5, 3.5, 4, 4.2, 4.5,
                          5, 4.8, 4.5, 4.4, 4.6, 5, 5.2, 4.8, 4, 3, 2.2, 1.5])
FRAUD_HOURS = np.array([5, 5, 4.5, 4, 3, 2, 1, 0.8, 0.8, 0.8, 0.8, 0.8,
                        0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 1, 1.5, 2.5, 3.5, 4.5, 5])


def _default_values():
    return {"genuine": (3.6, 0.9), "fraud": (5.3, 1.0)}


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of a synthetic world. Rates are fractions, not percentages."""

    n_cards: int = 1000
    gender_split: float = 0.5
    duration_days: int = 60
    txn_rate: float = 1.7
    n_merchants: int = 800
    n_merchant_codes: int = 14
    base_fraud_rate: float = 0.0059
    fraud_rate_gender_gap: float = 1.0
    gap_gender: str = "F"
    proxy_strength: float = 0.0
    value_distribution: dict = field(default_factory=_default_values)
    seed: int = 0

    def __post_init__(self):
        problems = []
        for name in ("n_cards", "duration_days", "n_merchants", "n_merchant_codes"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value <= 0:
                problems.append(f"{name} must be a positive integer, got {value!r}")
        if not 0 < self.gender_split < 1:
            problems.append(f"gender_split must be in (0, 1), got {self.gender_split}")
        if not self.txn_rate > 0:
            problems.append(f"txn_rate must be > 0, got {self.txn_rate}")
        if not 0 < self.base_fraud_rate < 1:
            problems.append(f"base_fraud_rate must be in (0, 1), got {self.base_fraud_rate}")
        if not self.fraud_rate_gender_gap > 0:
            problems.append(f"fraud_rate_gender_gap must be > 0, got {self.fraud_rate_gender_gap}")
        if self.gap_gender not in GROUPS:
            problems.append(f"gap_gender must be one of {GROUPS}, got {self.gap_gender!r}")
        if not 0 <= self.proxy_strength <= 1:
            problems.append(f"proxy_strength must be in [0, 1], got {self.proxy_strength}")
        if isinstance(self.n_merchants, (int, np.integer)) and isinstance(self.n_merchant_codes, (int, np.integer)) \
                and self.n_merchants < self.n_merchant_codes:
            problems.append("n_merchants must be at least n_merchant_codes")
        values = self.value_distribution
        if not isinstance(values, dict) or set(values) != {"genuine", "fraud"}:
            problems.append("value_distribution needs exactly the keys 'genuine' and 'fraud'")
        else:
            for kind, params in values.items():
                if len(params) != 2 or not params[1] > 0:
                    problems.append(f"value_distribution[{kind!r}] must be (mu, sigma > 0), got {params!r}")
        if problems:
            raise InvalidConfigError("; ".join(problems))
        object.__setattr__(self, "value_distribution",
                           {k: tuple(float(x) for x in v) for k, v in values.items()})

    def to_dict(self):
        data = asdict(self)
        data["value_distribution"] = {k: list(v) for k, v in self.value_distribution.items()}
        return data

    @classmethod
    def from_dict(cls, data) -> "GeneratorConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfigError(f"unknown generator settings {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "GeneratorConfig":
        return replace(self, **changes)


def merchant_code_profiles(n_codes: int):
    """``(risk, male_pref, female_pref)`` over merchant codes.

    Codes come in pairs of equal risk; males favour the even member of each
    pair and females the odd one, so both profiles average the same risk.
    An unpaired last code gets the mean risk and no gender preference.
    """
    n_pairs = n_codes // 2
    risk = np.ones(n_codes)
    male = np.zeros(n_codes)
    female = np.zeros(n_codes)
    if n_pairs:
        levels = np.exp(np.linspace(-1.2, 1.2, n_pairs))
        risk[0:2 * n_pairs:2] = levels
        risk[1:2 * n_pairs:2] = levels
        if n_codes % 2:
            risk[-1] = levels.mean()
        male[0:2 * n_pairs:2] = 1.0 / n_pairs
        female[1:2 * n_pairs:2] = 1.0 / n_pairs
    else:
        male[:] = female[:] = 1.0
    return risk / risk.mean(), male, female


def _card(config: GeneratorConfig, index: int, risk, prefs, scale, merchants_by_code):
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, index]))
    gender = "M" if rng.random() < config.gender_split else "F"
    k = config.n_merchant_codes
    personal = rng.dirichlet(np.ones(k))
    code_p = (1 - config.proxy_strength) * personal + config.proxy_strength * prefs[gender]
    activity = rng.gamma(4.0, 0.25)
    n = rng.poisson(config.txn_rate * activity * config.duration_days)

    codes = rng.choice(k, size=n, p=code_p / code_p.sum())
    gap = config.fraud_rate_gender_gap if gender == config.gap_gender else 1.0
    p_fraud = np.minimum(scale * risk[codes] * gap, 1.0)
    label = (rng.random(n) < p_fraud).astype(np.int8)

    days = rng.integers(0, config.duration_days, size=n)
    hours = np.where(label == 1,
                     rng.choice(24, size=n, p=FRAUD_HOURS / FRAUD_HOURS.sum()),
                     rng.choice(24, size=n, p=GENUINE_HOURS / GENUINE_HOURS.sum()))
    ts = START_EPOCH + days * DAY + hours * 3600 + rng.integers(0, 3600, size=n)

    (mu_g, sd_g), (mu_f, sd_f) = config.value_distribution["genuine"], config.value_distribution["fraud"]
    amount = np.where(label == 1, rng.lognormal(mu_f, sd_f, n), rng.lognormal(mu_g, sd_g, n))
    offsets = rng.random(n)
    merchant = np.array([merchants_by_code[c][int(o * len(merchants_by_code[c]))] for c, o in zip(codes, offsets)],
                        dtype=np.int64)
    order = np.argsort(ts, kind="stable")
    return gender, ts[order], codes[order], merchant[order], np.round(amount[order], 2), label[order]


def generate(config: GeneratorConfig = GeneratorConfig()) -> TransactionTable:
    """Generate a transaction table sorted by ``(card_id, timestamp)``."""
    risk, male, female = merchant_code_profiles(config.n_merchant_codes)
    prefs = {"M": male, "F": female}
    # every profile averages risk 1, so this hits base_fraud_rate in expectation
    gap_share = config.gender_split if config.gap_gender == "M" else 1 - config.gender_split
    scale = config.base_fraud_rate / (gap_share * config.fraud_rate_gender_gap + (1 - gap_share))
    merchants_by_code = [np.arange(c, config.n_merchants, config.n_merchant_codes)
                         for c in range(config.n_merchant_codes)]

    parts = [_card(config, i, risk, prefs, scale, merchants_by_code) for i in range(config.n_cards)]
    sizes = np.array([len(p[1]) for p in parts])
    card_ids = np.array([f"C{i + 1:06d}" for i in range(config.n_cards)])
    codes = np.concatenate([p[2] for p in parts]) if sizes.sum() else np.zeros(0, np.int64)
    merchants = np.concatenate([p[3] for p in parts]) if sizes.sum() else np.zeros(0, np.int64)
    code_names = np.array([f"MCC{c:02d}" for c in range(config.n_merchant_codes)])
    merchant_names = np.array([f"M{m:05d}" for m in range(config.n_merchants)])
    return TransactionTable(
        timestamp=np.concatenate([p[1] for p in parts]).astype(np.int64),
        card_id=np.repeat(card_ids, sizes),
        merchant_id=merchant_names[merchants],
        merchant_code=code_names[codes],
        amount=np.concatenate([p[4] for p in parts]).astype(float),
        gender=np.repeat(np.array([p[0] for p in parts]), sizes),
        label=np.concatenate([p[5] for p in parts]).astype(np.int8),
    )


def summarize(records, policy: BiasPolicy = BiasPolicy()) -> dict:
    """Per-gender card, defrauded-card and transaction counts plus fraud rates.

    A card counts as defrauded when it has at least one fraudulent
    transaction. Empty input gives an all-zero table.
    """
    if not isinstance(records, TransactionTable):
        records = validate_records(records) if len(records) else None

    def row(mask):
        if records is None or not mask.any():
            return {"cards": 0, "defrauded_cards": 0, "transactions": 0, "frauds": 0, "fraud_rate": 0.0}
        cards = records.card_id[mask]
        fraud = records.label[mask] == 1
        n = int(mask.sum())
        return {
            "cards": int(len(np.unique(cards))),
            "defrauded_cards": int(len(np.unique(cards[fraud]))),
            "transactions": n,
            "frauds": int(fraud.sum()),
            "fraud_rate": float(fraud.sum()) / n,
        }

    if records is None:
        empty = np.zeros(0, dtype=bool)
        table = {"total": row(empty), **{g: row(empty) for g in GROUPS}}
    else:
        table = {"total": row(np.ones(len(records), dtype=bool)),
                 **{g: row(records.gender == g) for g in GROUPS}}
    table["true_fraud_rate_parity"] = parity(
        "true_fraud_rate_parity", table["M"]["fraud_rate"], table["F"]["fraud_rate"], policy,
        grouping=Grouping.DATASET).to_dict()
    table["fraud_rate_unit"] = "fraction"
    return table


# ---------------------------------------------------------------------------
# score-level populations


@dataclass(frozen=True)
class ScoredPopulationConfig:
    """A scored population where one group's genuine transactions look fraud-like more often.

    ``lookalike_rate`` is the share of the other group's negatives whose
    score is drawn from the fraud score distribution; ``gap_group`` gets
    ``fpr_gap`` times as many. Lookalike scores sit between the genuine and
    fraud score distributions. All other score behaviour is shared.
    """

    n_records: int = 400_000
    base_fraud_rate: float = 0.005
    fpr_gap: float = 3.0
    gap_group: str = "F"
    lookalike_rate: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.n_records <= 0:
            raise InvalidConfigError("n_records must be positive")
        if not 0 < self.base_fraud_rate < 1:
            raise InvalidConfigError("base_fraud_rate must be in (0, 1)")
        if not 0 < self.lookalike_rate * max(self.fpr_gap, 1.0) <= 1 or self.fpr_gap <= 0:
            raise InvalidConfigError("lookalike_rate * fpr_gap must be in (0, 1]")
        if self.gap_group not in GROUPS:
            raise InvalidConfigError(f"gap_group must be one of {GROUPS}")


def generate_scored(config: ScoredPopulationConfig = ScoredPopulationConfig()) -> ScoredBatch:
    """Draw a scored batch with equal fraud rates and a false-positive gap between groups."""
    rng = np.random.default_rng(config.seed)
    n = config.n_records
    group = np.where(rng.random(n) < 0.5, "M", "F")
    label = (rng.random(n) < config.base_fraud_rate).astype(np.int8)
    look_rate = np.where(group == config.gap_group, config.lookalike_rate * config.fpr_gap, config.lookalike_rate)
    lookalike = (label == 0) & (rng.random(n) < look_rate)
    score = np.where(label == 1, rng.beta(6.0, 2.0, n), np.where(lookalike, rng.beta(4.0, 3.0, n), rng.beta(2.0, 10.0, n)))
    value = np.round(np.where(label == 1, rng.lognormal(5.3, 1.0, n), rng.lognormal(3.6, 0.9, n)), 2)
    return ScoredBatch(score=score, label=label, group=group, value=value,
                       card_id=np.array([f"C{i % 5000 + 1:06d}" for i in range(n)]))
