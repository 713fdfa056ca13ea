"""Scorer interface shared by trained and closed-form models."""
from __future__ import annotations

import numpy as np

from ..tabular import Instance, Schema

THRESHOLD = 0.5


class NotDifferentiableError(TypeError):
    pass


class Scorer:
    """Binary probabilistic classifier over code vectors.

    Subclasses implement ``proba(Z)`` for a batch of code vectors, and
    ``gradient_codes(z)`` when ``has_gradient``.
    """

    schema: Schema
    has_gradient: bool = False

    def proba(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def proba_one(self, z: np.ndarray) -> float:
        return float(self.proba(np.asarray(z, dtype=float)[None, :])[0])

    def predict_proba(self, x: Instance | np.ndarray) -> float:
        z = self.schema.to_codes(x) if isinstance(x, Instance) else np.asarray(x, dtype=float)
        return self.proba_one(z)

    def predict(self, Z: np.ndarray) -> np.ndarray:
        return (self.proba(np.atleast_2d(Z)) >= THRESHOLD).astype(np.int64)

    def is_positive(self, x) -> bool:
        return self.predict_proba(x) >= THRESHOLD

    def gradient_codes(self, z: np.ndarray) -> np.ndarray:
        raise NotDifferentiableError(f"{type(self).__name__} has no gradient")

    def gradient(self, x: Instance | np.ndarray) -> np.ndarray:
        """d m / d x over code coordinates (zero for categorical features)."""
        z = self.schema.to_codes(x) if isinstance(x, Instance) else np.asarray(x, dtype=float)
        return self.gradient_codes(z)
