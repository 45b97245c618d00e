import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraudfair.exceptions import EmptyInputError, ValidationError
from fraudfair.records import (
    ScoredBatch,
    ScoredRecord,
    TransactionRecord,
    TransactionTable,
    read_scored_csv,
    read_transactions_csv,
    validate_records,
    write_scored_csv,
    write_transactions_csv,
)


def rec(ts=0, card="c1", amount=1.0, gender="M", label=0):
    return TransactionRecord(ts, card, "m1", "mcc1", amount, gender, label)


def test_sorted_by_card_then_time():
    t = validate_records([rec(5, "b"), rec(9, "a"), rec(1, "b"), rec(3, "a")])
    assert list(zip(t.card_id.tolist(), t.timestamp.tolist())) == [("a", 3), ("a", 9), ("b", 1), ("b", 5)]


def test_all_violations_collected():
    bad = [rec(amount=-1.0), rec(gender="X"), rec(label=2), rec(card=""), rec(amount=float("nan"))]
    with pytest.raises(ValidationError) as info:
        validate_records(bad)
    errors = info.value.errors
    assert [e.row for e in errors] == [0, 1, 2, 3, 4]
    assert errors[0].kind == "NegativeAmount"
    assert info.value.kinds == {"NegativeAmount", "MalformedRow"}


def test_empty_input():
    with pytest.raises(EmptyInputError) as info:
        validate_records([])
    assert info.value.kinds == {"EmptyInput"}


def test_gender_aliases_and_cent_rounding():
    t = validate_records([rec(gender="female", amount=1.005), rec(1, gender="Male", amount=0.0)])
    assert sorted(t.gender.tolist()) == ["F", "M"]
    assert t.amount_cents.tolist() == [100, 0]
    assert (t.amount >= 0).all()


def test_to_records_round_trip():
    recs = [rec(3, "a", 2.5, "F", 1), rec(1, "a", 0.1, "M", 0)]
    t = TransactionTable.from_records(recs)
    assert t.to_records() == sorted(recs, key=lambda r: (r.card_id, r.timestamp))


transactions = st.lists(
    st.builds(
        TransactionRecord,
        st.integers(0, 2_000_000_000),
        st.text("abcXYZ09", min_size=1, max_size=6),
        st.text("mn12", min_size=1, max_size=4),
        st.sampled_from(["5411", "5812", "MCC07"]),
        st.integers(0, 10_000_000).map(lambda c: c / 100),
        st.sampled_from(["M", "F"]),
        st.integers(0, 1),
    ),
    min_size=1, max_size=30,
)


@settings(max_examples=50, deadline=None)
@given(transactions)
def test_transactions_csv_round_trip(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    table = validate_records(records)
    write_transactions_csv(table, path)
    back = read_transactions_csv(path)
    for name in ("timestamp", "card_id", "merchant_id", "merchant_code", "amount", "gender", "label"):
        assert np.array_equal(getattr(back, name), getattr(table, name)), name


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1), st.sampled_from("MF"),
                          st.floats(0, 1e7, allow_subnormal=False)), min_size=1, max_size=30))
def test_scored_csv_round_trip_is_exact(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "s.csv"
    batch = ScoredBatch.from_records([ScoredRecord(s, y, g, v, f"c{i}") for i, (s, y, g, v) in enumerate(rows)])
    write_scored_csv(batch, path)
    back = read_scored_csv(path)
    assert np.array_equal(back.score, batch.score)
    assert np.array_equal(back.value, batch.value)
    assert back.label.tolist() == batch.label.tolist()
    assert back.group.tolist() == batch.group.tolist()
    assert back.card_id.tolist() == batch.card_id.tolist()


def test_scored_batch_validation():
    with pytest.raises(ValidationError) as info:
        ScoredBatch.from_arrays([0.5, 1.2, 0.1], [1, 0, 3], ["M", "F", "?"], [1.0, -2.0, 0.0])
    assert {(e.row, e.kind) for e in info.value.errors} == {
        (1, "MalformedRow"), (1, "NegativeAmount"), (2, "MalformedRow")}


def test_scored_csv_missing_column(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("score,label,group\n0.1,0,M\n")
    with pytest.raises(ValidationError):
        read_scored_csv(path)


def test_empty_scored_csv(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("score,label,group,value,card_id\n")
    with pytest.raises(EmptyInputError):
        read_scored_csv(path)


def test_transactions_csv_reports_bad_rows(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("timestamp,card_id,merchant_id,merchant_code,amount,gender,label\n"
                    "1,c,m,x,1.00,M,0\n"
                    "2.5,c,m,x,-3,Q,1\n")
    with pytest.raises(ValidationError) as info:
        read_transactions_csv(path)
    assert {e.row for e in info.value.errors} == {1}
    assert len(info.value.errors) == 3
