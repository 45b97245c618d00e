"""Behavioural feature pipeline for transaction fraud models.

Per transaction the pipeline emits target-encoded merchant code and merchant
id, the amount, optionally the gender bit (Male 0, Female 1), calendar
features, and running-window count / value-sum aggregates over the card and
the card x merchant-code and card x merchant interactions. Window aggregates
only look at strictly earlier transactions of the same key, and encoders and
the scaler are fitted on the training partition only.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import EmptyTrainingError, InvalidConfigError, UnsortedInputError
from .records import TransactionTable

DAY = 86_400
DEFAULT_WINDOWS = (DAY, 7 * DAY, 30 * DAY)
INTERACTION_KEYS = ("card", "card_merchant_code", "card_merchant_id")
DEFAULT_SMOOTHING = 20.0

_DURATION = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([smhdw]?)\s*$")
_UNIT_SECONDS = {"": 1, "s": 1, "m": 60, "h": 3600, "d": DAY, "w": 7 * DAY}


def parse_duration(text) -> int:
    """``"7d"`` -> 604800. Bare numbers are seconds."""
    if isinstance(text, (int, np.integer)):
        return int(text)
    match = _DURATION.match(str(text))
    if not match:
        raise InvalidConfigError(f"cannot parse duration {text!r}")
    return int(round(float(match.group(1)) * _UNIT_SECONDS[match.group(2)]))


def duration_label(seconds: int) -> str:
    for unit, size in (("d", DAY), ("h", 3600), ("m", 60)):
        if seconds % size == 0:
            return f"{seconds // size}{unit}"
    return f"{seconds}s"


@dataclass(frozen=True)
class FeatureConfig:
    windows: tuple = DEFAULT_WINDOWS
    include_gender: bool = True
    interaction_keys: tuple = INTERACTION_KEYS
    smoothing: float = DEFAULT_SMOOTHING

    def __post_init__(self):
        windows = tuple(parse_duration(w) for w in self.windows)
        if not windows or any(w <= 0 for w in windows):
            raise InvalidConfigError(f"windows must be strictly positive, got {self.windows}")
        if len(set(windows)) != len(windows):
            raise InvalidConfigError(f"windows must be duplicate-free, got {self.windows}")
        unknown = set(self.interaction_keys) - set(INTERACTION_KEYS)
        if unknown:
            raise InvalidConfigError(f"unknown interaction keys {sorted(unknown)}; choose from {INTERACTION_KEYS}")
        if not self.smoothing >= 0:
            raise InvalidConfigError(f"smoothing must be >= 0, got {self.smoothing}")
        object.__setattr__(self, "windows", windows)
        object.__setattr__(self, "interaction_keys", tuple(self.interaction_keys))

    def to_dict(self):
        return {
            "windows": [duration_label(w) for w in self.windows],
            "include_gender": self.include_gender,
            "interaction_keys": list(self.interaction_keys),
            "smoothing": self.smoothing,
        }

    @classmethod
    def from_dict(cls, data) -> "FeatureConfig":
        return cls(
            windows=tuple(data.get("windows", DEFAULT_WINDOWS)),
            include_gender=bool(data.get("include_gender", True)),
            interaction_keys=tuple(data.get("interaction_keys", INTERACTION_KEYS)),
            smoothing=float(data.get("smoothing", DEFAULT_SMOOTHING)),
        )


# ---------------------------------------------------------------------------
# building blocks


def time_features(timestamps):
    """Hour (0-23), day of week (Monday=0) and month (1-12), proleptic Gregorian UTC."""
    ts = np.asarray(timestamps, dtype=np.int64)
    days = np.floor_divide(ts, DAY)
    hour = np.floor_divide(ts - days * DAY, 3600)
    # 1970-01-01 was a Thursday
    day_of_week = np.mod(days + 3, 7)
    months = ts.astype("datetime64[s]").astype("datetime64[M]").astype(np.int64)
    month = np.mod(months, 12) + 1
    return hour, day_of_week, month


def rolling_aggregates(timestamps, keys, amounts, windows):
    """Count and value sum of earlier same-key transactions inside each window.

    For transaction ``t`` and window ``w`` the aggregate covers transactions
    with the same key and time in the open interval ``(t - w, t)``. Input may
    interleave keys but must be time-ordered within each key. Sums are
    accumulated in integer cents, so they are exact.

    Returns ``{window: (counts, sums)}`` aligned with the input rows.

    >>> out = rolling_aggregates([0, 10, 20], ["a", "a", "a"], [1.0, 2.0, 4.0], [15])
    >>> out[15][0].tolist(), out[15][1].tolist()
    ([0, 1, 1], [0.0, 1.0, 2.0])
    """
    ts = np.asarray(timestamps, dtype=np.int64)
    n = len(ts)
    cents = np.rint(np.asarray(amounts, dtype=float) * 100.0).astype(np.int64)
    windows = [int(w) for w in windows]
    if n == 0:
        return {w: (np.zeros(0, np.int64), np.zeros(0)) for w in windows}

    _, codes = np.unique(np.asarray(keys), return_inverse=True)
    order = np.argsort(codes, kind="stable")
    codes_sorted = codes[order]
    ts_sorted = ts[order]
    same_key = codes_sorted[1:] == codes_sorted[:-1]
    if np.any(same_key & (ts_sorted[1:] < ts_sorted[:-1])):
        raise UnsortedInputError("timestamps must be non-decreasing within each key")

    # shift each key onto its own disjoint stretch of the time axis
    span = int(ts_sorted.max() - ts_sorted.min()) + max(windows) + 1
    t = (ts_sorted - ts_sorted.min()) + codes_sorted.astype(np.int64) * span
    prefix = np.concatenate([[0], np.cumsum(cents[order])])

    hi = np.searchsorted(t, t, side="left")
    out = {}
    for w in windows:
        lo = np.searchsorted(t, t - w, side="right")
        count_sorted = hi - lo
        sum_sorted = (prefix[hi] - prefix[lo]) / 100.0
        counts = np.empty(n, dtype=np.int64)
        sums = np.empty(n, dtype=float)
        counts[order] = count_sorted
        sums[order] = sum_sorted
        out[w] = (counts, sums)
    return out


class TargetEncoder(BaseEstimator, TransformerMixin):
    """Smoothed fraud rate per category: ``(pos + s * prior) / (count + s)``.

    Unseen categories encode to the training prior. Accepts one categorical
    column (1-D input) or several (2-D input, one encoder per column).
    """

    def __init__(self, smoothing=DEFAULT_SMOOTHING):
        self.smoothing = smoothing

    def fit(self, X, y):
        X = self._columns(X)
        y = np.asarray(y, dtype=float).ravel()
        if len(y) == 0:
            raise EmptyTrainingError("target encoder needs at least one training row")
        if X.shape[0] != len(y):
            raise ValueError(f"X has {X.shape[0]} rows but y has {len(y)}")
        self.prior_ = float(y.mean())
        self.mappings_ = []
        s = float(self.smoothing)
        for col in X.T:
            cats, inv = np.unique(col, return_inverse=True)
            count = np.bincount(inv, minlength=len(cats)).astype(float)
            pos = np.bincount(inv, weights=y, minlength=len(cats))
            with np.errstate(invalid="ignore", divide="ignore"):
                enc = np.where(count + s > 0, (pos + s * self.prior_) / (count + s), self.prior_)
            self.mappings_.append(dict(zip(cats.tolist(), enc.tolist())))
        return self

    def transform(self, X):
        check_is_fitted(self, "mappings_")
        X = self._columns(X)
        out = np.empty(X.shape, dtype=float)
        for j, mapping in enumerate(self.mappings_):
            out[:, j] = [mapping.get(v, self.prior_) for v in X[:, j].tolist()]
        return out

    @staticmethod
    def _columns(X):
        X = np.asarray(X, dtype=object)
        return X.reshape(-1, 1) if X.ndim == 1 else X


class StandardScaler(BaseEstimator, TransformerMixin):
    """``(x - mean) / std`` per column with population std; constant columns map to 0."""

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptyTrainingError("scaler needs a non-empty 2-D training matrix")
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0)
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = np.asarray(X, dtype=float)
        constant = self.scale_ == 0
        safe = np.where(constant, 1.0, self.scale_)
        out = (X - self.mean_) / safe
        out[:, constant] = 0.0
        return out


# ---------------------------------------------------------------------------
# the full pipeline


@dataclass
class FeatureMatrix:
    """Model inputs plus the per-row metadata an audit needs."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list
    card_id: np.ndarray
    group: np.ndarray
    value: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.y)

    def __iter__(self):
        for row, label in zip(self.X, self.y):
            yield row, int(label)

    def take(self, index) -> "FeatureMatrix":
        return FeatureMatrix(self.X[index], self.y[index], list(self.feature_names), self.card_id[index],
                             self.group[index], self.value[index], dict(self.meta))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["card_id", "group", "value", "label", *self.feature_names])
            for i in range(len(self.y)):
                writer.writerow([self.card_id[i], self.group[i], repr(float(self.value[i])), int(self.y[i]),
                                 *(repr(float(v)) for v in self.X[i])])

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        import pandas as pd

        frame = pd.read_csv(path, dtype={"card_id": str, "group": str}, keep_default_na=False,
                            float_precision="round_trip")
        names = [c for c in frame.columns if c not in ("card_id", "group", "value", "label")]
        return cls(
            X=frame[names].to_numpy(dtype=float),
            y=frame["label"].to_numpy(dtype=np.int8),
            feature_names=names,
            card_id=frame["card_id"].to_numpy(dtype=str),
            group=frame["group"].to_numpy(dtype=str),
            value=frame["value"].to_numpy(dtype=float),
        )


class TransactionFeaturizer(BaseEstimator, TransformerMixin):
    """Fit encoders and scaler on training transactions, then featurise any table.

    ``X`` is a :class:`~fraudfair.records.TransactionTable`; labels are read
    from it, so ``y`` is ignored.
    """

    def __init__(self, windows=DEFAULT_WINDOWS, include_gender=True, interaction_keys=INTERACTION_KEYS,
                 smoothing=DEFAULT_SMOOTHING, scale=True):
        self.windows = windows
        self.include_gender = include_gender
        self.interaction_keys = interaction_keys
        self.smoothing = smoothing
        self.scale = scale

    @property
    def config(self) -> FeatureConfig:
        return FeatureConfig(tuple(self.windows), bool(self.include_gender), tuple(self.interaction_keys),
                             float(self.smoothing))

    def get_feature_names_out(self, input_features=None):
        cfg = self.config
        names = ["merchant_code_te", "merchant_id_te", "amount"]
        if cfg.include_gender:
            names.append("gender")
        names += ["hour", "day_of_week", "month"]
        for key in cfg.interaction_keys:
            for w in cfg.windows:
                label = duration_label(w)
                names += [f"{key}_count_{label}", f"{key}_sum_{label}"]
        return np.asarray(names, dtype=object)

    def fit(self, X: TransactionTable, y=None):
        if len(X) == 0:
            raise EmptyTrainingError("cannot fit the featuriser on zero transactions")
        cfg = self.config
        self.encoder_ = TargetEncoder(cfg.smoothing).fit(
            np.column_stack([X.merchant_code, X.merchant_id]), X.label)
        if self.scale:
            self.scaler_ = StandardScaler().fit(self._raw(X))
        self.n_features_in_ = len(self.get_feature_names_out())
        return self

    def transform(self, X: TransactionTable) -> np.ndarray:
        check_is_fitted(self, "encoder_")
        raw = self._raw(X)
        return self.scaler_.transform(raw) if self.scale else raw

    def featurize(self, X: TransactionTable) -> FeatureMatrix:
        return FeatureMatrix(
            X=self.transform(X),
            y=np.asarray(X.label, dtype=np.int8),
            feature_names=list(self.get_feature_names_out()),
            card_id=X.card_id,
            group=X.gender,
            value=X.amount,
            meta={"feature_config": self.config.to_dict()},
        )

    def _raw(self, X: TransactionTable) -> np.ndarray:
        cfg = self.config
        cols = [*self.encoder_.transform(np.column_stack([X.merchant_code, X.merchant_id])).T, X.amount]
        if cfg.include_gender:
            cols.append((X.gender == "F").astype(float))
        hour, dow, month = time_features(X.timestamp)
        cols += [hour, dow, month]
        for key in cfg.interaction_keys:
            agg = rolling_aggregates(X.timestamp, _key_column(X, key), X.amount, cfg.windows)
            for w in cfg.windows:
                counts, sums = agg[w]
                cols += [counts, sums]
        return np.column_stack([np.asarray(c, dtype=float) for c in cols])


def _key_column(X: TransactionTable, key: str) -> np.ndarray:
    if key == "card":
        return X.card_id
    other = X.merchant_code if key == "card_merchant_code" else X.merchant_id
    return np.char.add(np.char.add(X.card_id.astype(str), "|"), other.astype(str))


def build_feature_matrix(transactions: TransactionTable, config: FeatureConfig = FeatureConfig(),
                         fitted: TransactionFeaturizer | None = None) -> tuple[FeatureMatrix, TransactionFeaturizer]:
    """Featurise ``transactions``; fits a new featuriser on them unless ``fitted`` is given."""
    if fitted is None:
        fitted = TransactionFeaturizer(config.windows, config.include_gender, config.interaction_keys,
                                       config.smoothing).fit(transactions)
    return fitted.featurize(transactions), fitted
