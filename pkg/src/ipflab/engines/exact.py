"""Exact CF engines: optimal cost over a product grid, and closest-candidate lookup."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .base import TIE_ATOL, CfEngine, CfRequest, CfResult, argmin_tiebreak

MAX_GRID = 10 ** 7
CHUNK = 4096


class GridExplosionError(ValueError):
    def __init__(self, size: int):
        super().__init__(f"grid of {size} points exceeds the limit of {MAX_GRID}")
        self.size = size


@dataclass
class GridSpec:
    """Discretisation of the input space for exhaustive search.

    ``values`` maps feature index -> explicit sorted values; other numerical
    features use ``n_quantiles`` training quantiles. ``include_input`` adds the
    query's own value to each numerical axis.
    """

    n_quantiles: int = 21
    include_input: bool = True
    values: dict = field(default_factory=dict)


def grid_axes(z: np.ndarray, req: CfRequest, cost_model, grid: GridSpec) -> list[np.ndarray]:
    schema = req.schema
    axes = []
    for d, f in enumerate(schema):
        if not req.actionable[d]:
            axes.append(np.array([z[d]]))
            continue
        if d in grid.values:
            vals = np.asarray(grid.values[d], dtype=float)
        elif f.is_categorical:
            vals = np.arange(len(f.categories), dtype=float)
        else:
            cdf = cost_model.stats[d].cdf
            if cdf.knots.size:
                at = np.searchsorted(cdf.fractions, np.linspace(0, 1, grid.n_quantiles), side="left")
                vals = cdf.knots[np.minimum(at, cdf.knots.size - 1)]
            else:
                vals = np.array([z[d]])
        if grid.include_input and not f.is_categorical:
            vals = np.append(vals, z[d])
        axes.append(np.unique(vals))
    return axes


def optimal_cost_cf(req: CfRequest, cost_model, grid: GridSpec | None = None) -> CfResult:
    """Minimum-cost valid grid point.

    Grid points are visited in increasing cost; the first valid one fixes the
    optimum, then all valid points within the tie tolerance compete on
    lexicographic code order.
    """
    grid = grid or GridSpec()
    z = req.codes
    axes = grid_axes(z, req, cost_model, grid)
    shape = tuple(a.size for a in axes)
    size = int(np.prod(shape, dtype=np.float64))
    if size > MAX_GRID:
        raise GridExplosionError(size)
    per = [cost_model.value_costs(d, z[d], a) for d, a in enumerate(axes)]
    total = np.zeros(shape)
    for d, c in enumerate(per):
        total = total + c.reshape([-1 if i == d else 1 for i in range(len(axes))])
    total = total.ravel()
    order = np.argsort(total, kind="stable")

    def points(flat):
        idx = np.unravel_index(flat, shape)
        return np.column_stack([axes[d][idx[d]] for d in range(len(axes))])

    best_cost = None
    for start in range(0, size, CHUNK):
        chunk = order[start:start + CHUNK]
        valid = req.model.proba(points(chunk)) >= req.target_p
        if valid.any():
            best_cost = total[chunk[np.argmax(valid)]]
            break
    if best_cost is None:
        return CfResult.failure("optimal-cost", req.schema, "no valid grid point", grid_size=size)
    tied = np.flatnonzero(total <= best_cost + TIE_ATOL)
    P = points(tied)
    ok = req.model.proba(P) >= req.target_p
    P, tc = P[ok], total[tied][ok]
    best = argmin_tiebreak(tc, keys=P)
    return CfResult.of(P[best], "optimal-cost", req, grid_size=size, cost=float(tc[best]))


def lookup_cf(req: CfRequest, candidate_set, cost_model, index: "LookupIndex | None" = None,
              respect_actionability: bool = True) -> CfResult:
    """Closest member of a finite candidate set (ties -> lowest candidate index)."""
    S = np.atleast_2d(np.asarray(candidate_set if index is None else index.codes, dtype=float))
    if S.shape[0] == 0 or S.size == 0:
        raise ValueError("empty candidate set")
    z = req.codes
    pool = np.arange(S.shape[0])
    fixed = ~req.actionable
    if respect_actionability and fixed.any():
        pool = pool[np.all(S[:, fixed] == z[fixed], axis=1)]
        if pool.size == 0:
            return CfResult.failure("lookup", req.schema, "no candidate matches the immutable features")
        index = None
    if index is not None:
        i = index.query(z)
    else:
        i = int(pool[argmin_tiebreak(cost_model.costs(z, S[pool]))])
    return CfResult.of(S[i], "lookup", req, candidate_index=i)


class LookupIndex:
    """KD-tree over the cost embedding (cost = l1 distance there)."""

    def __init__(self, codes: np.ndarray, cost_model):
        self.codes = np.atleast_2d(np.asarray(codes, dtype=float))
        self.cost_model = cost_model
        self.tree = cKDTree(cost_model.embed(self.codes))

    def query(self, z: np.ndarray) -> int:
        e = self.cost_model.embed(z[None, :])[0]
        dist, _ = self.tree.query(e, k=1, p=1)
        near = np.array(sorted(self.tree.query_ball_point(e, r=dist + 1e-7, p=1)))
        costs = self.cost_model.costs(z, self.codes[near])
        return int(near[argmin_tiebreak(costs)])


class OptimalCostEngine(CfEngine):
    name = "optimal-cost"

    def __init__(self, model, cost_model, target_p=0.5, grid: GridSpec | None = None):
        super().__init__(model, cost_model, target_p, 1)
        self.grid = grid or GridSpec()

    def explain(self, z, rng=None):
        return optimal_cost_cf(self.request(z), self.cost_model, self.grid)


class LookupEngine(CfEngine):
    name = "lookup"

    def __init__(self, model, cost_model, candidates, target_p=0.5, use_index=False,
                 respect_actionability=True):
        super().__init__(model, cost_model, target_p, 1)
        self.candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
        self.respect_actionability = respect_actionability
        self.index = LookupIndex(self.candidates, cost_model) if use_index else None

    def explain(self, z, rng=None):
        return lookup_cf(self.request(z), self.candidates, self.cost_model, self.index,
                         self.respect_actionability)


def positive_training_candidates(model, train) -> np.ndarray:
    """Correctly predicted positive training rows, the default lookup set."""
    pred = model.predict(train.codes)
    return train.codes[(pred == 1) & (train.labels == 1)]
