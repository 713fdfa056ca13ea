"""End-to-end theory benches producing report rows."""
from __future__ import annotations

import numpy as np

from ..cost import CostModel
from ..engines import GridSpec, InverseDistanceEngine, OptimalCostEngine
from ..models import SyntheticModel, make_synthetic
from ..tabular import numerical_schema, uniform_stats
from .gridworld import random_grid_world
from .polygon import PolygonScenario, polygon_monte_carlo
from .stability import STABLE, UNSTABLE, certify_stability, find_instability_witness, verify_cost_bound

U_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


def grid_worlds(n: int, seed: int = 0):
    """``n`` random grid worlds, alternating linear and forest models."""
    rng = np.random.default_rng(seed)
    return [random_grid_world(rng, "linear" if i % 2 == 0 else "forest") for i in range(n)]


def _probes(world, n, rng):
    neg = world.negatives()
    if len(neg) > n:
        neg = neg[np.sort(rng.choice(len(neg), n, replace=False))]
    return neg


def stability_bench(n_worlds: int = 50, probes_per_world: int = 20, u_grid=U_GRID, seed: int = 0,
                    engines=("optimal-cost", "lookup")):
    """Certificates for the exact engines on random grid worlds.

    Returns (rows, certificates); one row per (world, engine) with counts.
    """
    rng = np.random.default_rng([seed, 1])
    rows, certs = [], []
    for w, world in enumerate(grid_worlds(n_worlds, seed)):
        probes = _probes(world, probes_per_world, rng)
        if len(probes) == 0:
            continue
        for name in engines:
            engine = world.optimal_cost() if name == "optimal-cost" else world.lookup()
            cs = certify_stability(engine, probes, u_grid)
            certs.extend(cs)
            rows.append({"world": w, "engine": name, "model": type(world.model).__name__,
                         "features": len(world.schema), "grid_points": len(world.points),
                         "probes": len(cs), "stable": sum(c.verdict == STABLE for c in cs),
                         "unstable": sum(c.verdict == UNSTABLE for c in cs),
                         "inconclusive": sum(c.verdict not in (STABLE, UNSTABLE) for c in cs)})
    return rows, certs


def two_candidate_engine(eps: float = 1e-9):
    """Inverse-distance engine over two antipodal CFs with the subject at their midpoint."""
    model = make_synthetic({"family": "polygon_vertices", "k": 2, "radius": 1.0, "eps": eps})
    cm = CostModel(model.schema, uniform_stats(model.schema))
    return InverseDistanceEngine(model, cm, model.vertices, eps), np.zeros(2)


def inverse_distance_bench(u_grid=U_GRID, seed: int = 0):
    engine, x = two_candidate_engine()
    cert = certify_stability(engine, x[None, :], u_grid, seed=seed)[0]
    sampled = find_instability_witness(engine, x, u_grid, seed=seed)
    return cert, sampled


def graded_world(n_values: int = 21):
    """Two numerical features on [0, 1] with a smooth logistic score."""
    schema = numerical_schema(["x0", "x1"], [(0.0, 1.0), (0.0, 1.0)])
    model = SyntheticModel("linear", {"w": [6.0, 4.0], "b": -6.0}, schema)
    cm = CostModel(schema, uniform_stats(schema))
    grid = GridSpec(include_input=False, values={0: np.linspace(0, 1, n_values), 1: np.linspace(0, 1, n_values)})
    return model, cm, grid


def cost_bound_bench(n_worlds: int = 10, probes_per_world: int = 3, u_grid=(0.1, 0.5, 0.9),
                     trials: int = 30, seed: int = 0):
    """Expected IPF cost against c(x, A(x)) for certified engines, plus a
    conservative (p=0.9) optimal-cost engine on a graded model."""
    rng = np.random.default_rng([seed, 2])
    rows = []
    for w, world in enumerate(grid_worlds(n_worlds, seed)):
        probes = _probes(world, probes_per_world, rng)
        if len(probes) == 0:
            continue
        for name, engine in (("optimal-cost", world.optimal_cost()), ("lookup", world.lookup())):
            certs = certify_stability(engine, probes, u_grid)
            stable = np.array([c.probe for c in certs if c.verdict == STABLE])
            if len(stable) == 0:
                continue
            for chk in verify_cost_bound(engine, stable, u_grid, 30, trials, seed=seed + w):
                rows.append({"case": f"world{w}", "engine": name, "target_p": 0.5, **chk.as_row()})
    model, cm, grid = graded_world()
    engine = OptimalCostEngine(model, cm, 0.9, grid)
    probes = np.array([[0.2, 0.3], [0.4, 0.2], [0.1, 0.6]])
    for chk in verify_cost_bound(engine, probes, u_grid, 30, 1, cm, seed=seed):
        rows.append({"case": "graded", "engine": "optimal-cost", "target_p": 0.9, **chk.as_row()})
    return rows


def polygon_bench(ks=(2, 3, 4, 5), us=(0.1, 0.3, 0.5, 0.7, 0.9, 1.0), trials: int = 10000, seed: int = 0,
                  trials_low_u: int | None = None):
    """One row per (k, u); ``trials_low_u`` (if given) is used for u <= 0.1."""
    rows = []
    for k in ks:
        for u in us:
            n = trials_low_u if (trials_low_u and u <= 0.1) else trials
            rows.append(polygon_monte_carlo(PolygonScenario(k, u, n), seed).as_row())
    return rows
