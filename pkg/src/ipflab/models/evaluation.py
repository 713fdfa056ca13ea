from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tabular import Dataset
from .base import Scorer


@dataclass
class EvalMetrics:
    accuracy: float
    f1: float
    f1_degenerate: bool = False

    def as_dict(self):
        return {"accuracy": self.accuracy, "f1": self.f1, "f1_degenerate": self.f1_degenerate}


def evaluate(model: Scorer, test: Dataset) -> EvalMetrics:
    """Accuracy at the 0.5 threshold and positive-class F1.

    F1 is reported as 0 with ``f1_degenerate`` set when it is undefined
    (no predicted and no actual positives).
    """
    if len(test) == 0:
        raise ValueError("empty test set")
    pred = model.predict(test.codes)
    y = test.labels
    acc = float(np.mean(pred == y))
    tp = int(np.sum((pred == 1) & (y == 1)))
    if pred.sum() == 0:
        return EvalMetrics(acc, 0.0, True)
    return EvalMetrics(acc, 2 * tp / int(pred.sum() + y.sum()), False)
