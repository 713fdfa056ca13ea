"""Improvement cost between instances and along trajectories.

Categorical features cost 1 per change. Numerical features cost the absolute
difference of their training-set CDF values, so a full sweep over a feature's
range costs (almost) 1. ``mad_l1`` is the MAD-weighted l1 distance used by the
gradient engine's objective.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .tabular import FeatureStats, Instance, Schema, SchemaError


class CostModel:
    def __init__(self, schema: Schema, stats: Sequence[FeatureStats]):
        if len(stats) != len(schema):
            raise SchemaError("one FeatureStats per feature required")
        self.schema = schema
        self.stats = list(stats)
        self.cat = schema.categorical_mask
        self.num_idx = np.flatnonzero(~self.cat)
        self.cat_idx = np.flatnonzero(self.cat)
        self.mad_weights = np.array(
            [0.0 if f.is_categorical else s.mad_weight for f, s in zip(schema, self.stats)]
        )
        self._knots = [self.stats[d].cdf.knots for d in self.num_idx]
        self._fracs = [self.stats[d].cdf.fractions for d in self.num_idx]

    # ----------------------------------------------------------------- vectorised core

    def cdf_values(self, Z: np.ndarray) -> np.ndarray:
        """Clamped CDF value of each numerical column of ``Z`` (..., D) -> (..., n_num)."""
        Z = np.asarray(Z, dtype=float)
        out = np.empty(Z.shape[:-1] + (len(self.num_idx),))
        for j, d in enumerate(self.num_idx):
            knots = self._knots[j]
            if knots.size == 0:
                out[..., j] = 0.0
            else:
                out[..., j] = np.interp(Z[..., d], knots, self._fracs[j], left=0.0, right=1.0)
        return out

    def embed(self, Z: np.ndarray) -> np.ndarray:
        """Coordinates in which the cost is an l1 distance.

        Numerical features map to their CDF value, each categorical feature to
        one-hot/2, so |e(x) - e(x')|_1 = c(x, x').
        """
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        parts = [self.cdf_values(Z)]
        for d in self.cat_idx:
            k = len(self.schema[d].categories)
            parts.append(0.5 * (Z[:, d:d + 1] == np.arange(k)).astype(float))
        return np.hstack(parts)

    def feature_costs(self, z: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """Per-feature costs between ``z`` and each row of ``Z`` -> (n, D) (or (D,))."""
        Z = np.asarray(Z, dtype=float)
        single = Z.ndim == 1
        Z = np.atleast_2d(Z)
        z = np.asarray(z, dtype=float)
        z = np.broadcast_to(z, Z.shape)
        out = np.zeros(Z.shape)
        if self.num_idx.size:
            out[:, self.num_idx] = np.abs(self.cdf_values(Z) - self.cdf_values(z))
        if self.cat_idx.size:
            out[:, self.cat_idx] = (Z[:, self.cat_idx] != z[:, self.cat_idx]).astype(float)
        return out[0] if single else out

    def value_costs(self, d: int, v: float, values: np.ndarray) -> np.ndarray:
        """Cost of moving feature ``d`` from code ``v`` to each of ``values``."""
        values = np.asarray(values, dtype=float)
        if self.cat[d]:
            return (values != v).astype(float)
        F = self.stats[d].cdf
        return np.abs(F(values) - F(v))

    def costs(self, z: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """c(z, Z[i]) for each row -> (n,) (or scalar for 1-D ``Z``)."""
        fc = self.feature_costs(z, Z)
        return fc.sum(axis=-1)

    def pairwise_path_cost(self, states: np.ndarray) -> float:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if states.shape[0] < 2:
            return 0.0
        fc = np.zeros((states.shape[0] - 1, states.shape[1]))
        if self.num_idx.size:
            F = self.cdf_values(states)
            fc[:, self.num_idx] = np.abs(np.diff(F, axis=0))
        if self.cat_idx.size:
            C = states[:, self.cat_idx]
            fc[:, self.cat_idx] = (C[1:] != C[:-1]).astype(float)
        return float(fc.sum())

    def mad_distances(self, z: np.ndarray, Z: np.ndarray) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        diff = np.abs(Z - np.asarray(z, dtype=float))
        out = (diff * self.mad_weights).sum(axis=1)
        if self.cat_idx.size:
            out += (diff[:, self.cat_idx] > 0).sum(axis=1)
        return out

    # ----------------------------------------------------------------- Instance API

    def _codes(self, x) -> np.ndarray:
        if isinstance(x, Instance):
            return self.schema.to_codes(x)
        z = np.asarray(x, dtype=float)
        if z.shape != (len(self.schema),):
            raise SchemaError("schema mismatch")
        return z

    def feature_cost(self, d: int, v, v2) -> float:
        f = self.schema[d]
        if f.is_categorical:
            self.schema.code_of(d, v)
            self.schema.code_of(d, v2)
            return float(v != v2)
        F = self.stats[d].cdf
        return float(abs(F(float(v)) - F(float(v2))))

    def instance_cost(self, x, x2) -> float:
        return float(self.costs(self._codes(x), self._codes(x2)))

    def trajectory_cost(self, states) -> float:
        if len(states) == 0:
            raise ValueError("trajectory must contain at least one state")
        return self.pairwise_path_cost(np.array([self._codes(s) for s in states]))

    def mad_l1(self, x, x2) -> float:
        return float(self.mad_distances(self._codes(x), self._codes(x2))[0])
