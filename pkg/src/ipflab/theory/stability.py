"""IPF stability certificates and Monte Carlo checks of the expected-cost bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..fulfillment import fulfill_codes, support_codes
from ..ipf import IpfConfig, run_ipf
from ..models.base import THRESHOLD

STABLE, UNSTABLE, INCONCLUSIVE = "stable", "unstable", "inconclusive"


@dataclass
class StabilityCertificate:
    engine: str
    probe: np.ndarray
    u_grid: tuple
    verdict: str
    witness: dict | None = None
    n_checked: int = 0
    note: str = ""

    def as_row(self) -> dict:
        return {"engine": self.engine, "probe": " ".join(repr(float(v)) for v in self.probe),
                "u_grid": " ".join(repr(float(u)) for u in self.u_grid), "verdict": self.verdict,
                "n_checked": self.n_checked,
                "witness": "" if self.witness is None else " ".join(repr(float(v)) for v in self.witness["w"]),
                "witness_seed": "" if self.witness is None else self.witness["seed"]}


def _first(engine, z, seed):
    res = engine.explain(z, np.random.default_rng(seed))
    if res.failed or len(res) == 0:
        return None
    return res.codes[0]


def certify_stability(engine, probes, u_grid, eps: float = 0.0, repeats: int = 3,
                      seed: int = 0) -> list[StabilityCertificate]:
    """Check that ``engine`` returns the same CF at every negatively predicted
    partial fulfillment of each probe (for the effort levels in ``u_grid``).

    Determinism at the probe is checked first by repeating the query under
    ``repeats`` different seeds. The first disagreement becomes the witness,
    recorded with the seed that reproduces it.
    """
    model = engine.model
    cat = model.schema.categorical_mask
    certs = []
    for z in np.atleast_2d(np.asarray(probes, dtype=float)):
        cert = StabilityCertificate(engine.name, z.copy(), tuple(float(u) for u in u_grid), STABLE)
        certs.append(cert)
        if model.proba_one(z) >= THRESHOLD:
            cert.verdict, cert.note = INCONCLUSIVE, "probe is not negative"
            continue
        goal = _first(engine, z, seed)
        if goal is None:
            cert.verdict, cert.note = INCONCLUSIVE, "engine failed at the probe"
            continue
        for r in range(1, repeats):
            other = _first(engine, z, seed + r)
            cert.n_checked += 1
            if other is None or not np.array_equal(other, goal):
                cert.verdict = UNSTABLE
                cert.witness = {"w": z.copy(), "seed": seed + r, "cf": other, "expected": goal}
                break
        if cert.verdict == UNSTABLE:
            continue
        W = support_codes(z, goal, u_grid, eps, cat)
        W = W[model.proba(W) < THRESHOLD]
        for i, w in enumerate(W):
            s = seed + repeats + i
            cf = _first(engine, w, s)
            cert.n_checked += 1
            if cf is None or not np.array_equal(cf, goal):
                cert.verdict = UNSTABLE
                cert.witness = {"w": w.copy(), "seed": s, "cf": cf, "expected": goal}
                break
    return certs


def find_instability_witness(engine, probe, u_grid, eps: float = 0.0, draws: int = 200, seed: int = 0):
    """Sample partial fulfillments ``w`` of ``probe`` and return the first
    (w, seed) at which the engine's CF differs from its CF at the probe."""
    model = engine.model
    cat = model.schema.categorical_mask
    z = np.asarray(probe, dtype=float)
    rng = np.random.default_rng(seed)
    goal = _first(engine, z, seed)
    for i in range(draws):
        u = float(u_grid[rng.integers(len(u_grid))])
        w = fulfill_codes(z, goal, u, eps, cat, rng)
        if model.proba_one(w) >= THRESHOLD:
            continue
        s = seed + 1 + i
        cf = _first(engine, w, s)
        if cf is None or not np.array_equal(cf, goal):
            return {"w": w, "seed": s, "u": u, "cf": cf, "expected": goal}
    return None


@dataclass
class BoundCheck:
    probe: np.ndarray
    u: float
    bound: float
    mean: float
    se: float
    max_cost: float
    n_below: int
    trials: int
    costs: np.ndarray = field(repr=False, default=None)

    @property
    def holds(self) -> bool:
        return self.mean <= self.bound + 3 * self.se + 1e-12

    def as_row(self) -> dict:
        return {"probe": " ".join(repr(float(v)) for v in self.probe), "u": self.u, "bound": self.bound,
                "mean": self.mean, "se": self.se, "max_cost": self.max_cost, "n_below": self.n_below,
                "trials": self.trials, "holds": self.holds}


def verify_cost_bound(engine, probes, u_grid, T: int = 30, trials: int = 100, cost_model=None,
                      eps: float = 0.0, seed: int = 0) -> list[BoundCheck]:
    """Monte Carlo expected trajectory cost per (probe, u) against c(x, A(x))."""
    cost_model = cost_model or engine.cost_model
    model = engine.model
    out = []
    for pi, z in enumerate(np.atleast_2d(np.asarray(probes, dtype=float))):
        goal = _first(engine, z, seed)
        if goal is None:
            continue
        bound = float(cost_model.costs(z, goal))
        for ui, u in enumerate(u_grid):
            cfg = IpfConfig(float(u), T, engine.target_p, eps)
            ss = np.random.SeedSequence(seed, spawn_key=(pi, ui))
            costs = np.array([run_ipf(z, model, engine, cfg, cost_model, np.random.default_rng(c)).total_cost
                              for c in ss.spawn(trials)])
            se = float(costs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
            out.append(BoundCheck(z.copy(), float(u), bound, float(costs.mean()), se, float(costs.max()),
                                  int((costs < bound - 1e-12).sum()), trials, costs))
    return out
