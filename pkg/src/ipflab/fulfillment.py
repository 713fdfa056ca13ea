"""u-partial fulfillment of a counterfactual goal, its support set, and progress arithmetic."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .tabular import Instance, Schema, SchemaError

MAX_SUPPORT_FLIPS = 20


@dataclass(frozen=True)
class EffortLevel:
    u: float

    def __post_init__(self):
        if not 0.0 <= self.u <= 1.0:
            raise ValueError(f"effort level must be in [0, 1], got {self.u}")

    def __float__(self):
        return float(self.u)


@dataclass
class FulfillmentOutcome:
    state: Instance
    flipped: frozenset[str]


def _u(u) -> float:
    return float(u.u if isinstance(u, EffortLevel) else EffortLevel(float(u)).u)


def fulfill_codes(z: np.ndarray, goal: np.ndarray, u: float, eps: float, categorical: np.ndarray,
                  rng: np.random.Generator | None) -> np.ndarray:
    """Code-vector form of ``partial_fulfill``.

    Numerical features interpolate (snapping to the goal within ``eps``).
    Categorical features draw one uniform per categorical feature, in feature
    order, and take the goal value when the draw is below ``u``.
    """
    w = (1.0 - u) * z + u * goal
    num = ~categorical
    snap = num & (np.abs(z - goal) <= eps)
    w[snap] = goal[snap]
    if u == 1.0:
        w[num] = goal[num]
    if categorical.any():
        draws = rng.random(int(categorical.sum())) if rng is not None else np.ones(int(categorical.sum()))
        cz, cg = z[categorical], goal[categorical]
        w[categorical] = np.where(draws < u, cg, cz)
    return w


def partial_fulfill(x: Instance, goal: Instance, u, eps: float, rng: np.random.Generator,
                    schema: Schema) -> FulfillmentOutcome:
    u = _u(u)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if len(x) != len(schema) or len(goal) != len(schema):
        raise SchemaError("schema mismatch")
    z, g = schema.to_codes(x), schema.to_codes(goal)
    w = fulfill_codes(z, g, u, eps, schema.categorical_mask, rng)
    flipped = frozenset(
        schema[d].name for d in np.flatnonzero(schema.categorical_mask) if w[d] != z[d]
    )
    return FulfillmentOutcome(schema.from_codes(w, x.index), flipped)


def support_codes(z: np.ndarray, goal: np.ndarray, u_grid, eps: float,
                  categorical: np.ndarray) -> np.ndarray:
    """All reachable partial fulfillments over ``u_grid`` x categorical flip subsets."""
    us = [_u(u) for u in u_grid]
    if not us:
        raise ValueError("u_grid must be nonempty")
    differing = np.flatnonzero(categorical & (z != goal))
    if differing.size > MAX_SUPPORT_FLIPS:
        raise ValueError(f"support explosion: {differing.size} differing categorical features")
    num = ~categorical
    out = []
    for u in us:
        base = (1.0 - u) * z + u * goal
        snap = num & ((np.abs(z - goal) <= eps) | (u == 1.0))
        base[snap] = goal[snap]
        base[categorical] = z[categorical]
        if u == 1.0:
            w = base.copy()
            w[differing] = goal[differing]
            out.append(w)
            continue
        if u == 0.0:
            out.append(base)
            continue
        for r in range(differing.size + 1):
            for subset in itertools.combinations(differing, r):
                w = base.copy()
                w[list(subset)] = goal[list(subset)]
                out.append(w)
    return np.unique(np.array(out), axis=0)


def support(x: Instance, goal: Instance, u_grid, eps: float, schema: Schema) -> set[Instance]:
    pts = support_codes(schema.to_codes(x), schema.to_codes(goal), u_grid, eps, schema.categorical_mask)
    return {schema.from_codes(w) for w in pts}


def effort_progress(u, rounds: int) -> float:
    """Fraction of the way to a fixed goal after ``rounds`` fulfillments at effort ``u``."""
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    return 1.0 - (1.0 - _u(u)) ** rounds
