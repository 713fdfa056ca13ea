"""Request/result types and the engine interface shared by all CF algorithms."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..models.base import Scorer
from ..tabular import Instance, Schema

TIE_ATOL = 1e-9


@dataclass
class CfRequest:
    input: Instance | np.ndarray
    model: Scorer
    target_p: float = 0.5
    k: int = 1
    actionable: np.ndarray | None = None

    def __post_init__(self):
        if not 0.5 <= self.target_p < 1.0:
            raise ValueError("target_p must be in [0.5, 1)")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.actionable is None:
            self.actionable = self.model.schema.actionable_mask.copy()

    @property
    def schema(self) -> Schema:
        return self.model.schema

    @property
    def codes(self) -> np.ndarray:
        if isinstance(self.input, Instance):
            return self.schema.to_codes(self.input)
        return np.asarray(self.input, dtype=float)


@dataclass
class CfResult:
    codes: np.ndarray
    engine_name: str
    validity: np.ndarray
    schema: Schema
    degenerate: bool = False
    failed: bool = False
    reason: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def candidates(self) -> list[Instance]:
        return [self.schema.from_codes(c) for c in self.codes]

    def __len__(self):
        return 0 if self.failed else len(self.codes)

    @classmethod
    def failure(cls, engine_name: str, schema: Schema, reason: str, **extras) -> "CfResult":
        return cls(np.zeros((0, len(schema))), engine_name, np.zeros(0, dtype=bool), schema,
                   failed=True, reason=reason, extras=extras)

    @classmethod
    def of(cls, codes, engine_name: str, req: CfRequest, degenerate=False, **extras) -> "CfResult":
        codes = np.atleast_2d(np.asarray(codes, dtype=float))
        validity = req.model.proba(codes) >= req.target_p
        return cls(codes, engine_name, validity, req.schema, degenerate=degenerate, extras=extras)


def argmin_tiebreak(costs: np.ndarray, keys: np.ndarray | None = None, atol: float = TIE_ATOL) -> int:
    """Index of the minimum cost; near-ties (within ``atol``) go to the lexicographically
    smallest row of ``keys``, or to the lowest index when ``keys`` is None."""
    costs = np.asarray(costs, dtype=float)
    tied = np.flatnonzero(costs <= costs.min() + atol)
    if keys is None or tied.size == 1:
        return int(tied[0])
    rows = keys[tied]
    return int(tied[np.lexsort(rows.T[::-1])[0]])


class CfEngine:
    """A configured CF algorithm bound to a model and cost model.

    ``explain(z, rng)`` takes a code vector and returns a ``CfResult``;
    deterministic engines ignore ``rng``.
    """

    name = "engine"
    deterministic = True

    def __init__(self, model: Scorer, cost_model, target_p: float = 0.5, k: int = 1):
        self.model = model
        self.cost_model = cost_model
        self.target_p = target_p
        self.k = k

    def request(self, z) -> CfRequest:
        return CfRequest(z, self.model, self.target_p, self.k)

    def explain(self, z: np.ndarray, rng: np.random.Generator | None = None) -> CfResult:
        raise NotImplementedError

    def __call__(self, x: Instance, rng=None) -> CfResult:
        return self.explain(self.model.schema.to_codes(x), rng)
