import pytest
from hypothesis import given
from hypothesis import strategies as st

from fraudfair.exceptions import UnknownMetricError
from fraudfair.metrics import UtilityMetrics
from fraudfair.parity import (
    BiasPolicy,
    Grouping,
    demographic_parity,
    equalized_odds,
    metric_grouping,
    parity,
)

rates = st.one_of(st.none(), st.floats(0, 1))


def util(tpr=0.5, fpr=0.01, ppr=0.05):
    return UtilityMetrics(tpr=tpr, fpr=fpr, ppv=0.5, npv=0.99, f1=0.5, predicted_positive_rate=ppr, vdr=tpr)


def test_tpr_parity_formula():
    p = parity("tpr_parity", 0.9, 0.8)
    assert p.raw == pytest.approx(0.1)
    assert p.normalized == pytest.approx(0.1 / 0.9)
    assert p.grouping is Grouping.PROTECTION


def test_imbalance_masking():
    p = parity("fpr_parity", 0.002, 0.006)
    assert p.raw == pytest.approx(0.004)
    assert p.normalized == pytest.approx(2 / 3)
    assert not p.significant_raw
    assert p.significant_normalized


def test_zero_maximum_is_undefined():
    p = parity("fpr_parity", 0.0, 0.0)
    assert p.raw == 0.0
    assert p.normalized is None
    assert not p.significant_normalized


def test_undefined_input_propagates():
    p = parity("tpr_parity", None, 0.5)
    assert p.raw is None and p.normalized is None
    assert not p.significant_raw and not p.significant_normalized


def test_threshold_is_strict():
    policy = BiasPolicy(0.05)
    assert not policy.flags(0.05)
    assert policy.flags(0.0500001)


def test_policy_rejects_nonpositive_threshold():
    with pytest.raises(ValueError):
        BiasPolicy(0.0)


class TestEqualizedOdds:
    def test_sum_of_components(self):
        p = equalized_odds(util(tpr=0.8, fpr=0.03), util(tpr=0.7, fpr=0.01))
        assert p.raw == pytest.approx(0.12)

    def test_identity(self):
        p = equalized_odds(util(), util())
        assert p.raw == 0 and p.normalized == 0
        assert not p.significant_raw and not p.significant_normalized

    def test_normalized_is_mean_of_components(self):
        p = equalized_odds(util(tpr=0.8, fpr=0.01), util(tpr=0.6, fpr=0.03))
        assert p.normalized == pytest.approx((0.25 + 2 / 3) / 2)
        assert p.normalized == pytest.approx(0.4583, abs=5e-5)

    def test_undefined_component(self):
        assert equalized_odds(util(tpr=None), util()).raw is None

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_decomposition(self, t1, t2, f1, f2):
        eo = equalized_odds(util(tpr=t1, fpr=f1), util(tpr=t2, fpr=f2))
        assert eo.raw == parity("tpr_parity", t1, t2).raw + parity("fpr_parity", f1, f2).raw


class TestDemographicParity:
    def test_equal_rates(self):
        assert demographic_parity(util(ppr=0.05), util(ppr=0.05)).raw == 0

    def test_formula(self):
        p = demographic_parity(util(ppr=0.04), util(ppr=0.06))
        assert p.raw == pytest.approx(0.02)
        assert p.normalized == pytest.approx(1 / 3)

    def test_empty_group(self):
        assert demographic_parity(util(ppr=None), util()).raw is None


@pytest.mark.parametrize("name,grouping", [
    ("npv_parity", Grouping.PROTECTION),
    ("tpr_parity", Grouping.PROTECTION),
    ("recall_parity", Grouping.PROTECTION),
    ("vdr_parity", Grouping.PROTECTION),
    ("fpr_parity", Grouping.QOS),
    ("precision_parity", Grouping.QOS),
    ("f1_parity", Grouping.COMBINED),
    ("equalized_odds", Grouping.COMBINED),
    ("demographic_parity", Grouping.COMBINED),
    ("roc_auc_parity", Grouping.COMBINED),
    ("pr_auc_parity", Grouping.COMBINED),
    ("tpr_at_fp_ratio_parity", Grouping.PROTECTION_AT_FIXED_QOS),
    ("vdr_at_fp_ratio_parity", Grouping.PROTECTION_AT_FIXED_QOS),
    ("true_fraud_rate_parity", Grouping.DATASET),
])
def test_metric_grouping(name, grouping):
    assert metric_grouping(name) is grouping


def test_unknown_metric():
    with pytest.raises(UnknownMetricError):
        metric_grouping("accuracy_parity")


@given(rates, rates)
def test_symmetry(m, f):
    a, b = parity("tpr_parity", m, f), parity("tpr_parity", f, m)
    assert (a.raw, a.normalized) == (b.raw, b.normalized)


@given(rates, rates)
def test_bounds_and_dominance(m, f):
    p = parity("tpr_parity", m, f)
    if p.raw is not None:
        assert 0 <= p.raw <= 1
    if p.normalized is not None:
        assert 0 <= p.normalized <= 1
        assert p.normalized >= p.raw
    # undefined iff an input is undefined or both are zero
    assert (p.normalized is None) == (m is None or f is None or (m == 0 and f == 0))


@given(st.floats(0, 1))
def test_zero_at_identity(v):
    p = parity("tpr_parity", v, v)
    assert p.raw == 0
    assert p.normalized in (0, None)
    assert not p.significant_raw and not p.significant_normalized
