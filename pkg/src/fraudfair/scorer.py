"""Baseline fraud scorer and training-set downsampling.

The scorer is an L2-regularised logistic model fitted by full-batch gradient
descent on class-weighted cross-entropy. It only exists so that audits can
run end to end without external model dependencies; any model's scores can
be audited through the scored CSV instead.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ArityMismatchError, NonFiniteLossError, SingleClassError, TargetUnreachableError


def downsample_negatives(labels, target_fraud_rate: float, seed: int = 0) -> np.ndarray:
    """Indices (sorted) of all positives plus a seeded uniform subset of negatives.

    The number of negatives kept solves ``P / (P + n) = target`` to the
    nearest integer, so the resulting fraud rate lands on the target up to
    rounding of a single row.
    """
    if not 0 < target_fraud_rate < 1:
        raise ValueError(f"target_fraud_rate must be in (0, 1), got {target_fraud_rate}")
    y = np.asarray(labels).ravel().astype(bool)
    pos = np.flatnonzero(y)
    neg = np.flatnonzero(~y)
    if len(y) == 0:
        return np.zeros(0, dtype=np.int64)
    rate = len(pos) / len(y)
    if rate > target_fraud_rate + 1e-12:
        raise TargetUnreachableError(
            f"input fraud rate {rate:.6f} already exceeds target {target_fraud_rate:.6f}")
    n_keep = int(round(len(pos) * (1 - target_fraud_rate) / target_fraud_rate))
    if n_keep >= len(neg):
        return np.arange(len(y))
    rng = np.random.default_rng(seed)
    kept = rng.choice(neg, size=n_keep, replace=False)
    return np.sort(np.concatenate([pos, kept]))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def class_weights(y, scheme="balanced") -> np.ndarray:
    """Per-row weights; ``balanced`` is inversely proportional to class frequency."""
    y = np.asarray(y).astype(bool)
    if scheme is None or scheme == "none":
        return np.ones(len(y))
    if scheme != "balanced":
        raise ValueError(f"unknown class_weight {scheme!r}")
    n_pos = y.sum()
    n_neg = len(y) - n_pos
    return np.where(y, len(y) / (2.0 * n_pos), len(y) / (2.0 * n_neg))


def loss_and_gradient(params, X, y, sample_weight, l2):
    """Weighted mean cross-entropy plus ``l2/2 * |w|^2`` (bias unpenalised).

    ``params`` is the weight vector with the bias appended last.
    """
    w, b = params[:-1], params[-1]
    total = sample_weight.sum()
    with np.errstate(over="ignore", invalid="ignore"):
        z = X @ w + b
        ce = np.where(y, np.logaddexp(0.0, -z), np.logaddexp(0.0, z))
        loss = float(sample_weight @ ce / total + 0.5 * l2 * (w @ w))
        residual = sample_weight * (_sigmoid(z) - y) / total
        grad = np.empty_like(params)
        grad[:-1] = X.T @ residual + l2 * w
        grad[-1] = residual.sum()
    return loss, grad


class LogisticScorer(BaseEstimator, ClassifierMixin):
    """Logistic fraud scorer trained with a fixed full-batch gradient-descent budget.

    ``seed`` only drives weight initialisation (small Gaussian); the bias
    starts at the log-odds of the weighted base rate.
    """

    def __init__(self, learning_rate=0.1, epochs=300, l2=1e-4, class_weight="balanced", seed=0,
                 init_scale=0.01):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.l2 = l2
        self.class_weight = class_weight
        self.seed = seed
        self.init_scale = init_scale

    def fit(self, X, y, feature_names=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y).ravel().astype(float)
        if X.ndim != 2 or X.shape[0] != len(y):
            raise ValueError(f"X shape {X.shape} does not match {len(y)} labels")
        if len(np.unique(y)) < 2:
            raise SingleClassError("training data must contain both fraud and genuine examples")
        sw = class_weights(y, self.class_weight)
        base = float(sw @ y / sw.sum())
        rng = np.random.default_rng(self.seed)
        params = np.append(rng.normal(0.0, self.init_scale, X.shape[1]), np.log(base / (1.0 - base)))

        self.loss_curve_ = []
        for _ in range(int(self.epochs)):
            loss, grad = loss_and_gradient(params, X, y, sw, self.l2)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise NonFiniteLossError(f"training diverged at epoch {len(self.loss_curve_)}")
            self.loss_curve_.append(loss)
            params = params - self.learning_rate * grad
        final, _ = loss_and_gradient(params, X, y, sw, self.l2)
        if not np.isfinite(final):
            raise NonFiniteLossError("training diverged on the final step")
        self.loss_curve_.append(final)

        self.coef_ = params[:-1].copy()
        self.intercept_ = float(params[-1])
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.feature_names_ = list(feature_names) if feature_names is not None else None
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.coef_):
            raise ArityMismatchError(f"model expects {len(self.coef_)} features, got shape {X.shape}")
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def to_dict(self):
        check_is_fitted(self, "coef_")
        return {
            "model": "logistic",
            "feature_names": self.feature_names_,
            "weights": [float(w) for w in self.coef_],
            "bias": self.intercept_,
            "training_config": {k: v for k, v in self.get_params().items()},
            "final_loss": self.loss_curve_[-1],
            "notes": "fixed epoch budget; no validation-based early stopping",
        }

    @classmethod
    def from_dict(cls, data) -> "LogisticScorer":
        model = cls(**data["training_config"])
        model.coef_ = np.asarray(data["weights"], dtype=float)
        model.intercept_ = float(data["bias"])
        model.classes_ = np.array([0, 1])
        model.n_features_in_ = len(model.coef_)
        model.feature_names_ = data.get("feature_names")
        model.loss_curve_ = [data.get("final_loss")]
        return model


def train(X, y, seed=0, feature_names=None, **config) -> LogisticScorer:
    return LogisticScorer(seed=seed, **config).fit(X, y, feature_names=feature_names)


def score(model: LogisticScorer, X) -> np.ndarray:
    """Fraud probability per row."""
    return model.predict_proba(X)[:, 1]
