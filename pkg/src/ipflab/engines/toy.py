"""Stochastic inverse-distance engine over a fixed candidate set."""
from __future__ import annotations

import numpy as np

from .base import CfEngine, CfResult


def inverse_distance_choice(z, candidates, eps, rng) -> int:
    """Pick candidate i with probability proportional to 1/d_i (Euclidean);
    the first candidate within ``eps`` is picked outright."""
    d = np.linalg.norm(candidates - z, axis=1)
    close = np.flatnonzero(d <= eps)
    if close.size:
        return int(close[0])
    w = 1.0 / d
    return int(rng.choice(d.size, p=w / w.sum()))


class InverseDistanceEngine(CfEngine):
    name = "inverse-distance"
    deterministic = False

    def __init__(self, model, cost_model, candidates, eps=1e-9, target_p=0.5):
        super().__init__(model, cost_model, target_p, 1)
        self.candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
        self.eps = eps

    def explain(self, z, rng=None):
        rng = rng if rng is not None else np.random.default_rng()
        i = inverse_distance_choice(np.asarray(z, dtype=float), self.candidates, self.eps, rng)
        return CfResult.of(self.candidates[i], self.name, self.request(z), candidate_index=i)
