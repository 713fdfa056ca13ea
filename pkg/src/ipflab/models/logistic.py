from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..tabular import Dataset, Encoder, Schema
from .base import Scorer


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class LogisticHyper:
    learning_rate: float = 0.5
    epochs: int = 500
    l2: float = 1e-4


class LogisticModel(Scorer):
    has_gradient = True

    def __init__(self, schema: Schema, weights: np.ndarray, bias: float, loss_history=None):
        self.schema = schema
        self.encoder = Encoder(schema)
        self.weights = np.asarray(weights, dtype=float)
        self.bias = float(bias)
        self.loss_history = list(loss_history or [])
        # weight of each raw numerical feature through the min-max scaling
        self._raw_w = np.zeros(len(schema))
        for j, d in enumerate(self.encoder.col_feature):
            if self.encoder.col_category[j] < 0:
                self._raw_w[d] = self.weights[j] / self.encoder.col_span[j]

    def proba(self, Z):
        X = self.encoder.encode_codes(np.atleast_2d(Z))
        return expit(X @ self.weights + self.bias)

    def gradient_codes(self, z):
        p = self.proba_one(z)
        return p * (1.0 - p) * self._raw_w


def train_logistic(train: Dataset, stats=None, hyper: LogisticHyper | None = None) -> LogisticModel:
    """Full-batch gradient descent on the l2-regularised log loss (zero init, deterministic)."""
    hyper = hyper or LogisticHyper()
    if len(train) == 0:
        raise ValueError("empty training set")
    enc = Encoder(train.schema)
    X = enc.encode_codes(train.codes)
    y = train.labels.astype(float)
    n, p = X.shape
    w, b = np.zeros(p), 0.0
    history = []
    for epoch in range(hyper.epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            z = X @ w + b
            q = expit(z)
            loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * hyper.l2 * w @ w)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"loss became non-finite at epoch {epoch} (lr={hyper.learning_rate}, "
                f"|w|={np.linalg.norm(w):.3g}, last loss={history[-1] if history else None})"
            )
        history.append(loss)
        gw = X.T @ (q - y) / n + hyper.l2 * w
        gb = float(np.mean(q - y))
        w = w - hyper.learning_rate * gw
        b = b - hyper.learning_rate * gb
    return LogisticModel(train.schema, w, b, history)
