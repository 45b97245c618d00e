"""Hand-constructed scored batches with known group behaviour."""

import numpy as np

from fraudfair.records import ScoredBatch


def build(groups):
    """``groups`` maps group -> list of (score, label, value) triples."""
    score, label, group, value = [], [], [], []
    for g, rows in groups.items():
        for s, y, v in rows:
            score.append(s)
            label.append(y)
            group.append(g)
            value.append(v)
    return ScoredBatch.from_arrays(score, label, group, value)


def fpr_double_fixture():
    """At the pooled threshold for ratio 5, male FPR (0.02) is twice female FPR (0.01)."""
    def rows(n_high_neg):
        pos = [(0.9, 1, 10.0)] * 5 + [(0.7, 1, 10.0)] * 5
        neg = [(0.8, 0, 10.0)] * n_high_neg + [(0.1, 0, 10.0)] * (1000 - n_high_neg)
        return pos + neg
    return build({"M": rows(20), "F": rows(10)})


def measurement_fixture():
    """Identical positive scores per group; female negatives crowd the upper band.

    A pooled threshold gives both groups the same TPR, while per-group
    thresholds at the same FP ratio leave the female group well behind.
    """
    pos = [(float(s), 1, 50.0) for s in np.linspace(0.5, 0.99, 100)]
    low = [(float(s), 0, 50.0) for s in np.linspace(0.0, 0.4, 8000)]
    male_neg = [(float(s), 0, 50.0) for s in np.linspace(0.5, 0.999, 300)]
    female_neg = [(float(s), 0, 50.0) for s in np.linspace(0.5, 0.749, 1500)]
    return build({"M": pos + low + male_neg, "F": pos + low + female_neg})


def vdr_dissociation_fixture():
    """Same scores in both groups; female high-value frauds get the lowest fraud scores."""
    pos_scores = np.linspace(0.5, 0.99, 100)
    neg = [(float(s), 0, 20.0) for s in np.linspace(0.0, 0.7, 2000)]
    male = [(float(s), 1, 100.0) for s in pos_scores]
    # rank-reverse the values: the lowest-scoring 20 female frauds carry most of the value
    female_values = np.where(np.arange(100) < 20, 2000.0, 10.0)
    female = [(float(s), 1, float(v)) for s, v in zip(pos_scores, female_values)]
    return build({"M": male + neg, "F": female + neg})


def separation_gap_fixture(seed=3):
    """Female scores separate fraud from genuine less sharply than male scores."""
    rng = np.random.default_rng(seed)

    def rows(shift, n_neg=5000, n_pos=400):
        z = np.concatenate([rng.normal(shift, 1.0, n_pos), rng.normal(0.0, 1.0, n_neg)])
        s = 1 / (1 + np.exp(-(z - 2.0)))
        y = np.r_[np.ones(n_pos, int), np.zeros(n_neg, int)]
        v = rng.lognormal(4.0, 1.0, n_pos + n_neg)
        return list(zip(s.tolist(), y.tolist(), v.tolist()))

    return build({"M": rows(3.2), "F": rows(2.2)})
