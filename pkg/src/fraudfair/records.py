"""Domain records, columnar containers, and the CSV schemas.

Two row types flow through the package:

* :class:`TransactionRecord` -- a raw card transaction (generator output,
  feature-pipeline input).
* :class:`ScoredRecord` -- one scored transaction (audit input).

Bulk data is held column-wise in :class:`TransactionTable` and
:class:`ScoredBatch` so metric code can stay vectorised. Amounts are held at
cent precision; parsing rounds to the nearest cent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .exceptions import EmptyInputError, RecordError, ValidationError

TRANSACTION_COLUMNS = (
    "timestamp",
    "card_id",
    "merchant_id",
    "merchant_code",
    "amount",
    "gender",
    "label",
)
SCORED_COLUMNS = ("score", "label", "group", "value", "card_id")


class Gender(str, Enum):
    MALE = "M"
    FEMALE = "F"

    @classmethod
    def parse(cls, text: str) -> "Gender":
        key = str(text).strip().upper()
        if key in ("M", "MALE"):
            return cls.MALE
        if key in ("F", "FEMALE"):
            return cls.FEMALE
        raise ValueError(f"unknown gender {text!r}")

    @property
    def label(self) -> str:
        return "Male" if self is Gender.MALE else "Female"


GROUPS = (Gender.MALE.value, Gender.FEMALE.value)

_GENDER_ALIASES = {"M": "M", "MALE": "M", "F": "F", "FEMALE": "F"}


@dataclass(frozen=True)
class TransactionRecord:
    timestamp: int
    card_id: str
    merchant_id: str
    merchant_code: str
    amount: float
    gender: str
    label: int


@dataclass(frozen=True)
class ScoredRecord:
    score: float
    label: int
    group: str
    value: float
    card_id: str


@dataclass(frozen=True, eq=False)
class TransactionTable:
    """Column-oriented, validated transactions sorted by ``(card_id, timestamp)``."""

    timestamp: np.ndarray
    card_id: np.ndarray
    merchant_id: np.ndarray
    merchant_code: np.ndarray
    amount: np.ndarray
    gender: np.ndarray
    label: np.ndarray

    def __len__(self):
        return len(self.timestamp)

    def take(self, index) -> "TransactionTable":
        return TransactionTable(**{f.name: getattr(self, f.name)[index] for f in fields(self)})

    @property
    def amount_cents(self) -> np.ndarray:
        return np.rint(self.amount * 100.0).astype(np.int64)

    def to_records(self) -> list[TransactionRecord]:
        return [
            TransactionRecord(int(t), str(c), str(m), str(mc), float(a), str(g), int(y))
            for t, c, m, mc, a, g, y in zip(
                self.timestamp, self.card_id, self.merchant_id, self.merchant_code,
                self.amount, self.gender, self.label,
            )
        ]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({name: getattr(self, name) for name in TRANSACTION_COLUMNS})

    @classmethod
    def from_records(cls, records: Sequence[TransactionRecord]) -> "TransactionTable":
        return validate_records(records)


@dataclass(frozen=True, eq=False)
class ScoredBatch:
    """Column-oriented audit input."""

    score: np.ndarray
    label: np.ndarray
    group: np.ndarray
    value: np.ndarray
    card_id: np.ndarray

    def __len__(self):
        return len(self.score)

    def take(self, index) -> "ScoredBatch":
        return ScoredBatch(**{f.name: getattr(self, f.name)[index] for f in fields(self)})

    def to_records(self) -> list[ScoredRecord]:
        return [
            ScoredRecord(float(s), int(y), str(g), float(v), str(c))
            for s, y, g, v, c in zip(self.score, self.label, self.group, self.value, self.card_id)
        ]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({name: getattr(self, name) for name in SCORED_COLUMNS})

    @classmethod
    def from_arrays(cls, score, label, group, value=None, card_id=None) -> "ScoredBatch":
        """Build a batch from array-likes, validating every invariant."""
        score = np.asarray(score, dtype=float).ravel()
        n = len(score)
        label = np.asarray(label).ravel()
        group = np.asarray(group).ravel().astype(str)
        value = np.zeros(n) if value is None else np.asarray(value, dtype=float).ravel()
        card_id = np.full(n, "", dtype=str) if card_id is None else np.asarray(card_id).ravel().astype(str)
        lengths = {len(label), len(group), len(value), len(card_id)}
        if lengths != {n}:
            raise ValidationError([RecordError(-1, "MalformedRow", "columns have inconsistent lengths")])

        errors = []
        for row in np.flatnonzero(~np.isfinite(score) | (score < 0) | (score > 1)):
            errors.append(RecordError(int(row), "MalformedRow", f"score {score[row]} not in [0, 1]"))
        label_ok = np.isin(label, (0, 1))
        for row in np.flatnonzero(~label_ok):
            errors.append(RecordError(int(row), "MalformedRow", f"label {label[row]!r} not in {{0, 1}}"))
        for row in np.flatnonzero(~np.isfinite(value) | (value < 0)):
            errors.append(RecordError(int(row), "NegativeAmount", f"value {value[row]} must be >= 0"))
        if n and not np.isin(group, GROUPS).all():
            mapped = pd.Series(group).str.strip().str.upper().map(_GENDER_ALIASES)
            for row in np.flatnonzero(mapped.isna().to_numpy()):
                errors.append(RecordError(int(row), "MalformedRow", f"group {group[row]!r} not in {{M, F}}"))
            group = mapped.fillna("?").to_numpy(dtype=str)
        if errors:
            errors.sort(key=lambda e: (e.row, e.kind))
            raise ValidationError(errors)
        return cls(score, label.astype(np.int8), group, value, card_id)

    @classmethod
    def from_records(cls, records: Sequence[ScoredRecord]) -> "ScoredBatch":
        return cls.from_arrays(
            [r.score for r in records],
            [r.label for r in records],
            [r.group for r in records],
            [r.value for r in records],
            [r.card_id for r in records],
        )

    @classmethod
    def concat(cls, batches: Iterable["ScoredBatch"]) -> "ScoredBatch":
        batches = list(batches)
        return cls(**{
            f.name: np.concatenate([getattr(b, f.name) for b in batches]) for f in fields(cls)
        })


# ---------------------------------------------------------------------------
# validation


def _numeric(column: pd.Series) -> np.ndarray:
    # numpy's str -> float conversion is correctly rounded; pandas' fast parser is not
    text = column.str.strip().to_numpy(dtype=str)
    try:
        return text.astype(float)
    except ValueError:
        out = np.empty(len(text))
        for i, cell in enumerate(text):
            try:
                out[i] = float(cell)
            except ValueError:
                out[i] = np.nan
        return out


def _check_header(frame: pd.DataFrame, expected: Sequence[str]):
    missing = [c for c in expected if c not in frame.columns]
    if missing:
        raise ValidationError([RecordError(-1, "MalformedRow", f"missing column(s) {missing}")])


def _transactions_from_frame(frame: pd.DataFrame) -> TransactionTable:
    """Validate a frame of string cells and return a sorted table."""
    if len(frame) == 0:
        raise EmptyInputError()
    _check_header(frame, TRANSACTION_COLUMNS)
    errors: list[RecordError] = []

    ts = _numeric(frame["timestamp"])
    bad_ts = ~np.isfinite(ts) | (np.mod(ts, 1) != 0)
    amount = _numeric(frame["amount"])
    bad_amount = ~np.isfinite(amount)
    negative = np.isfinite(amount) & (amount < 0)
    gender = frame["gender"].str.strip().str.upper().map(_GENDER_ALIASES)
    bad_gender = gender.isna().to_numpy()
    label = frame["label"].str.strip().map({"0": 0, "1": 1})
    bad_label = label.isna().to_numpy()
    card = frame["card_id"].str.strip()
    bad_card = (card == "").to_numpy()

    for row in np.flatnonzero(bad_ts):
        errors.append(RecordError(int(row), "MalformedRow", f"timestamp {frame['timestamp'].iat[row]!r} is not an integer"))
    for row in np.flatnonzero(bad_amount):
        errors.append(RecordError(int(row), "MalformedRow", f"amount {frame['amount'].iat[row]!r} is not a number"))
    for row in np.flatnonzero(negative):
        errors.append(RecordError(int(row), "NegativeAmount", f"amount {amount[row]} < 0"))
    for row in np.flatnonzero(bad_gender):
        errors.append(RecordError(int(row), "MalformedRow", f"gender {frame['gender'].iat[row]!r} not in {{M, F}}"))
    for row in np.flatnonzero(bad_label):
        errors.append(RecordError(int(row), "MalformedRow", f"label {frame['label'].iat[row]!r} not in {{0, 1}}"))
    for row in np.flatnonzero(bad_card):
        errors.append(RecordError(int(row), "MalformedRow", "empty card_id"))
    if errors:
        errors.sort(key=lambda e: (e.row, e.kind))
        raise ValidationError(errors)

    card_arr = card.to_numpy(dtype=str)
    ts_arr = ts.astype(np.int64)
    order = np.lexsort((ts_arr, card_arr))
    return TransactionTable(
        timestamp=ts_arr[order],
        card_id=card_arr[order],
        merchant_id=frame["merchant_id"].str.strip().to_numpy(dtype=str)[order],
        merchant_code=frame["merchant_code"].str.strip().to_numpy(dtype=str)[order],
        amount=(np.rint(amount * 100.0) / 100.0)[order],
        gender=gender.to_numpy(dtype=str)[order],
        label=label.to_numpy(dtype=np.int8)[order],
    )


def validate_records(records: Sequence[TransactionRecord]) -> TransactionTable:
    """Check every record's invariants and return them sorted by card, then time.

    All violations are collected before raising, each tagged with the index
    of the offending record in ``records``.

    >>> rows = [TransactionRecord(20, "c1", "m", "x", 1.0, "M", 0),
    ...         TransactionRecord(10, "c1", "m", "x", 2.0, "M", 1)]
    >>> validate_records(rows).timestamp.tolist()
    [10, 20]
    """
    if len(records) == 0:
        raise EmptyInputError()
    frame = pd.DataFrame(
        [[str(getattr(r, c)) for c in TRANSACTION_COLUMNS] for r in records],
        columns=list(TRANSACTION_COLUMNS),
    )
    return _transactions_from_frame(frame)


def _scored_from_frame(frame: pd.DataFrame) -> ScoredBatch:
    if len(frame) == 0:
        raise EmptyInputError()
    _check_header(frame, SCORED_COLUMNS)
    errors: list[RecordError] = []
    score = _numeric(frame["score"])
    bad_score = ~np.isfinite(score) | (score < 0) | (score > 1)
    value = _numeric(frame["value"])
    bad_value = ~np.isfinite(value) | (value < 0)
    label = frame["label"].str.strip().map({"0": 0, "1": 1, "0.0": 0, "1.0": 1, "True": 1, "False": 0})
    bad_label = label.isna().to_numpy()
    group = frame["group"].str.strip().str.upper().map(_GENDER_ALIASES)
    bad_group = group.isna().to_numpy()

    for row in np.flatnonzero(bad_score):
        errors.append(RecordError(int(row), "MalformedRow", f"score {frame['score'].iat[row]!r} not in [0, 1]"))
    for row in np.flatnonzero(bad_value):
        kind = "NegativeAmount" if np.isfinite(value[row]) else "MalformedRow"
        errors.append(RecordError(int(row), kind, f"value {frame['value'].iat[row]!r} must be a number >= 0"))
    for row in np.flatnonzero(bad_label):
        errors.append(RecordError(int(row), "MalformedRow", f"label {frame['label'].iat[row]!r} not in {{0, 1}}"))
    for row in np.flatnonzero(bad_group):
        errors.append(RecordError(int(row), "MalformedRow", f"group {frame['group'].iat[row]!r} not in {{M, F}}"))
    if errors:
        errors.sort(key=lambda e: (e.row, e.kind))
        raise ValidationError(errors)
    return ScoredBatch(
        score=score,
        label=label.to_numpy(dtype=np.int8),
        group=group.to_numpy(dtype=str),
        value=value,
        card_id=frame["card_id"].str.strip().to_numpy(dtype=str),
    )


# ---------------------------------------------------------------------------
# CSV I/O


def _read_str_frame(path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        return pd.DataFrame()


def read_transactions_csv(path) -> TransactionTable:
    return _transactions_from_frame(_read_str_frame(path))


def write_transactions_csv(table: TransactionTable, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRANSACTION_COLUMNS)
        for rec in table.to_records():
            writer.writerow([rec.timestamp, rec.card_id, rec.merchant_id, rec.merchant_code,
                             f"{rec.amount:.2f}", rec.gender, rec.label])


def read_scored_csv(path) -> ScoredBatch:
    return _scored_from_frame(_read_str_frame(path))


def write_scored_csv(batch: ScoredBatch, path) -> None:
    frame = pd.DataFrame({
        "score": [repr(float(s)) for s in batch.score],
        "label": batch.label.astype(int),
        "group": batch.group,
        "value": [repr(float(v)) for v in batch.value],
        "card_id": batch.card_id,
    })
    frame.to_csv(Path(path), index=False, lineterminator="\n")
