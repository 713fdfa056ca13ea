"""How a subject picks one CF out of a diverse set."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import CfResult, argmin_tiebreak

KINDS = ("closest", "weighted", "uniform")


@dataclass(frozen=True)
class SelectionStrategy:
    kind: str = "closest"
    temperature: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown selection strategy {self.kind!r}")


class NoValidCandidateError(ValueError):
    pass


def select_index(z: np.ndarray, result: CfResult, strategy: SelectionStrategy, cost_model,
                 rng: np.random.Generator | None) -> int:
    valid = np.flatnonzero(result.validity) if len(result) else np.zeros(0, dtype=int)
    if valid.size == 0:
        raise NoValidCandidateError("result has no valid candidates")
    C = result.codes[valid]
    if valid.size == 1:
        return int(valid[0])
    if strategy.kind == "closest":
        return int(valid[argmin_tiebreak(cost_model.costs(z, C))])
    if strategy.kind == "uniform":
        return int(valid[rng.integers(valid.size)])
    logits = -cost_model.costs(z, C) / strategy.temperature
    p = np.exp(logits - logits.max())
    return int(valid[rng.choice(valid.size, p=p / p.sum())])


def select(input, result: CfResult, strategy: SelectionStrategy, cost_model, rng=None):
    """Return the chosen candidate as an ``Instance``."""
    z = cost_model._codes(input)
    return result.candidates[select_index(z, result, strategy, cost_model, rng)]
