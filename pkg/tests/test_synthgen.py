import numpy as np
import pytest

from fraudfair.audit import audit_global
from fraudfair.exceptions import InvalidConfigError
from fraudfair.metrics import roc_auc
from fraudfair.records import TransactionRecord, read_transactions_csv, write_transactions_csv
from fraudfair.scorer import LogisticScorer
from fraudfair.synthgen import (
    GeneratorConfig,
    ScoredPopulationConfig,
    generate,
    generate_scored,
    merchant_code_profiles,
    summarize,
)


def small(**kw):
    return GeneratorConfig(**{"n_cards": 120, "duration_days": 30, **kw})


def test_same_seed_gives_identical_csv(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_transactions_csv(generate(small(seed=7)), a)
    write_transactions_csv(generate(small(seed=7)), b)
    assert a.read_bytes() == b.read_bytes()


def test_different_seeds_differ():
    assert not np.array_equal(generate(small(seed=1)).amount, generate(small(seed=2)).amount)


def test_output_sorted_and_valid(tmp_path):
    t = generate(small(seed=3))
    key = list(zip(t.card_id.tolist(), t.timestamp.tolist()))
    assert key == sorted(key)
    assert (t.amount >= 0).all() and set(np.unique(t.label)) <= {0, 1}
    # survives a round trip through the validating reader unchanged
    write_transactions_csv(t, tmp_path / "t.csv")
    back = read_transactions_csv(tmp_path / "t.csv")
    assert np.array_equal(back.timestamp, t.timestamp) and np.array_equal(back.amount, t.amount)


def test_card_generation_is_independent_of_population_size():
    # a card's sub-seed depends only on (seed, index)
    a = generate(small(seed=4, n_cards=10))
    b = generate(small(seed=4, n_cards=20))
    first = b.card_id <= "C000010"
    assert np.array_equal(a.amount, b.amount[first])


@pytest.mark.parametrize("changes", [
    {"proxy_strength": 1.5}, {"proxy_strength": -0.1}, {"n_cards": 0}, {"gender_split": 1.0},
    {"base_fraud_rate": 0.0}, {"fraud_rate_gender_gap": 0.0}, {"gap_gender": "X"},
    {"n_merchants": 3, "n_merchant_codes": 14}, {"value_distribution": {"genuine": (3, 1)}},
    {"value_distribution": {"genuine": (3, 1), "fraud": (5, -1)}},
])
def test_invalid_config(changes):
    with pytest.raises(InvalidConfigError):
        GeneratorConfig(**changes)


def test_config_round_trip():
    cfg = GeneratorConfig(proxy_strength=0.8, fraud_rate_gender_gap=2.0, seed=3)
    assert GeneratorConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(InvalidConfigError):
        GeneratorConfig.from_dict({"bogus": 1})


def test_gender_profiles_share_expected_risk():
    for k in (1, 2, 13, 14):
        risk, male, female = merchant_code_profiles(k)
        assert risk.mean() == pytest.approx(1.0)
        assert male @ risk == pytest.approx(1.0) and female @ risk == pytest.approx(1.0)


def test_marginals_within_three_standard_errors():
    cfg = GeneratorConfig(n_cards=1000, seed=11, base_fraud_rate=0.02, gender_split=0.6)
    t = generate(cfg)
    assert len(t) >= 90_000
    n_cards = cfg.n_cards
    male_cards = len(np.unique(t.card_id[t.gender == "M"]))
    assert abs(male_cards / n_cards - 0.6) <= 3 * np.sqrt(0.6 * 0.4 / n_cards)
    rate = t.label.mean()
    assert abs(rate - 0.02) <= 3 * np.sqrt(0.02 * 0.98 / len(t))
    (mg, sg), (mf, sf) = cfg.value_distribution["genuine"], cfg.value_distribution["fraud"]
    expected = (1 - 0.02) * np.exp(mg + sg ** 2 / 2) + 0.02 * np.exp(mf + sf ** 2 / 2)
    assert abs(t.amount.mean() - expected) <= 3 * t.amount.std() / np.sqrt(len(t))


def test_gender_gap_sets_fraud_rate_ratio():
    t = generate(GeneratorConfig(base_fraud_rate=0.03, fraud_rate_gender_gap=2.0, proxy_strength=0.8, seed=5))
    assert len(t) >= 50_000
    ratio = t.label[t.gender == "F"].mean() / t.label[t.gender == "M"].mean()
    assert ratio == pytest.approx(2.0, rel=0.15)


def test_no_gap_no_proxy_gives_no_dataset_bias():
    # default fraud rates leave too few frauds at 200 cards for a 0.05 band
    hits = 0
    for seed in range(10):
        t = generate(GeneratorConfig(n_cards=200, duration_days=60, txn_rate=5.0, base_fraud_rate=0.2, seed=seed))
        hits += summarize(t)["true_fraud_rate_parity"]["normalized"] < 0.05
    assert hits >= 9


def _proxy_auc(table, seed=0):
    """Hold-out ROC-AUC of a gender classifier fed per-card merchant-code frequencies."""
    cards, inv = np.unique(table.card_id, return_inverse=True)
    codes, code_inv = np.unique(table.merchant_code, return_inverse=True)
    freq = np.zeros((len(cards), len(codes)))
    np.add.at(freq, (inv, code_inv), 1.0)
    freq /= freq.sum(axis=1, keepdims=True)
    gender = np.zeros(len(cards), dtype=int)
    gender[inv] = table.gender == "F"
    order = np.random.default_rng(seed).permutation(len(cards))
    train, test = order[: len(cards) // 2], order[len(cards) // 2:]
    model = LogisticScorer(epochs=500, learning_rate=1.0).fit(freq[train], gender[train])
    return roc_auc(gender[test], model.predict_proba(freq[test])[:, 1])


def test_proxy_channel_strength():
    strong = generate(GeneratorConfig(n_cards=2000, duration_days=30, proxy_strength=1.0, seed=1))
    none = generate(GeneratorConfig(n_cards=2000, duration_days=30, proxy_strength=0.0, seed=1))
    assert _proxy_auc(strong) >= 0.9
    assert _proxy_auc(none) <= 0.55


def test_summarize_counts_defrauded_cards():
    t = generate(small(seed=9, base_fraud_rate=0.05))
    s = summarize(t)
    for g in ("M", "F"):
        mask = t.gender == g
        assert s[g]["transactions"] == mask.sum()
        assert s[g]["defrauded_cards"] == len(set(t.card_id[mask & (t.label == 1)].tolist()))
    assert s["total"]["cards"] == s["M"]["cards"] + s["F"]["cards"]


def test_summarize_empty_is_all_zero():
    s = summarize([])
    for g in ("total", "M", "F"):
        assert s[g] == {"cards": 0, "defrauded_cards": 0, "transactions": 0, "frauds": 0, "fraud_rate": 0.0}


def test_summarize_single_fraud():
    recs = [TransactionRecord(i, "c1", "m", "x", 1.0, "M", int(i == 3)) for i in range(8)]
    s = summarize(recs)
    assert s["M"]["defrauded_cards"] == 1
    assert s["M"]["fraud_rate"] == pytest.approx(1 / 8)


def test_scored_population_has_equal_fraud_rates_and_fpr_gap():
    batch = generate_scored(ScoredPopulationConfig(seed=2))
    rates = {g: batch.label[batch.group == g].mean() for g in ("M", "F")}
    assert rates["F"] == pytest.approx(rates["M"], rel=0.1)
    fpr = audit_global(batch).parity("fpr_parity")
    assert fpr.group_values["F"] > 2 * fpr.group_values["M"]


def test_scored_population_config_validation():
    with pytest.raises(InvalidConfigError):
        ScoredPopulationConfig(lookalike_rate=0.5, fpr_gap=3.0)
