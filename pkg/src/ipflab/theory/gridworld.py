"""Small random discrete domains on which exact CF engines can be certified exhaustively."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..cost import CostModel
from ..engines import GridSpec, LookupEngine, OptimalCostEngine
from ..models import ForestHyper, SyntheticModel, train_forest
from ..models.base import THRESHOLD
from ..tabular import CATEGORICAL, NUMERICAL, Dataset, FeatureSchema, Schema, uniform_stats


@dataclass
class GridWorld:
    schema: Schema
    axes: list
    model: object
    cost_model: CostModel

    @property
    def points(self) -> np.ndarray:
        """All grid points in lexicographic code order."""
        return np.array(list(itertools.product(*self.axes)), dtype=float)

    def grid_spec(self) -> GridSpec:
        vals = {d: a for d, a in enumerate(self.axes) if not self.schema[d].is_categorical}
        return GridSpec(include_input=False, values=vals)

    def optimal_cost(self, target_p=0.5) -> OptimalCostEngine:
        return OptimalCostEngine(self.model, self.cost_model, target_p, self.grid_spec())

    def lookup(self, target_p=0.5) -> LookupEngine:
        P = self.points
        return LookupEngine(self.model, self.cost_model, P[self.model.proba(P) >= target_p], target_p)

    def negatives(self) -> np.ndarray:
        P = self.points
        return P[self.model.proba(P) < THRESHOLD]


def random_grid_world(rng: np.random.Generator, kind: str = "linear", max_features: int = 4,
                      max_values: int = 7, categorical_prob: float = 0.3) -> GridWorld:
    """A domain of 2..max_features features with 2..max_values values each.

    Numerical features take sorted random values in [0, 1] (bounds included);
    categorical ones take codes 0..n-1. ``kind`` is ``linear`` (a random
    logistic scorer with roughly 40% positive grid points) or ``forest``
    (a small forest fit to noisy labels of such a scorer).
    """
    D = int(rng.integers(2, max_features + 1))
    feats, axes = [], []
    for d in range(D):
        n = int(rng.integers(2, max_values + 1))
        if rng.random() < categorical_prob:
            feats.append(FeatureSchema(f"c{d}", CATEGORICAL, tuple(f"v{i}" for i in range(n)), None, True))
            axes.append(np.arange(n, dtype=float))
        else:
            inner = np.sort(rng.random(max(n - 2, 0)))
            axes.append(np.unique(np.concatenate([[0.0], inner, [1.0]])))
            feats.append(FeatureSchema(f"x{d}", NUMERICAL, (), (0.0, 1.0), True))
    schema = Schema(feats)
    cm = CostModel(schema, uniform_stats(schema))
    P = np.array(list(itertools.product(*axes)), dtype=float)
    w = rng.normal(size=D) * 4
    scores = P @ w
    b = -float(np.quantile(scores, 0.6))
    if kind == "linear":
        model = SyntheticModel("linear", {"w": w.tolist(), "b": b}, schema)
    elif kind == "forest":
        reps = np.repeat(P, 4, axis=0)
        noisy = reps @ w + b + rng.normal(scale=0.5, size=len(reps))
        labels = (noisy > 0).astype(np.int64)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        data = Dataset(schema, reps, labels)
        model = train_forest(data, hyper=ForestHyper(n_trees=5, max_depth=4, min_leaf=1,
                                                     seed=int(rng.integers(2 ** 31))))
    else:
        raise ValueError(f"unknown grid-world model kind {kind!r}")
    return GridWorld(schema, axes, model, cm)
