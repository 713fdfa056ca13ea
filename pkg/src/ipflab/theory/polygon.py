"""Randomized-search toy: CF vertices on a regular polygon, start at its centre.

The engine returns vertex i with probability proportional to 1/d_i, so the
goal can switch between rounds and partial effort gets erased.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ..models.synthetic import polygon_vertices

MAX_STEPS = 10 ** 7


@dataclass(frozen=True)
class PolygonScenario:
    k: int
    u: float
    trials: int = 10000
    radius: float = 1.0
    eps: float = 1e-9
    max_steps: int = MAX_STEPS

    def __post_init__(self):
        if not 2 <= self.k:
            raise ValueError("k must be >= 2")
        if not 0.0 < self.u <= 1.0:
            raise ValueError("u must be in (0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def vertices(self) -> np.ndarray:
        return polygon_vertices(self.k, self.radius)


@dataclass
class PolygonResult:
    scenario: PolygonScenario
    mean_relative_cost: float
    se: float
    consistency: float
    mean_steps: float
    guard_hits: int
    costs: np.ndarray

    def as_row(self) -> dict:
        s = self.scenario
        return {"scenario": "polygon", "k": s.k, "u": s.u, "trials": s.trials,
                "mean": self.mean_relative_cost, "se": self.se, "consistency": self.consistency,
                "mean_steps": self.mean_steps, "guard_hits": self.guard_hits}


@numba.njit(cache=True)
def _simulate(V, u, eps, seeds, max_steps):
    n_trials = seeds.shape[0]
    k = V.shape[0]
    cost = np.zeros(n_trials)
    steps = np.zeros(n_trials, dtype=np.int64)
    consistent = np.ones(n_trials, dtype=np.bool_)
    guard = np.zeros(n_trials, dtype=np.bool_)
    w = np.empty(k)
    keep = 1.0 - u
    for t in range(n_trials):
        np.random.seed(seeds[t])
        x0 = 0.0
        x1 = 0.0
        prev = -1
        n = 0
        total = 0.0
        done = False
        # the centre is never a vertex; afterwards only the last goal can have been reached
        while not done:
            if n >= max_steps:
                guard[t] = True
                break
            g = -1
            s = 0.0
            for i in range(k):
                d = math.sqrt((x0 - V[i, 0]) ** 2 + (x1 - V[i, 1]) ** 2)
                if d <= eps:
                    g = i
                    break
                w[i] = 1.0 / d
                s += w[i]
            if g < 0:
                r = np.random.random() * s
                g = k - 1
                for i in range(k):
                    r -= w[i]
                    if r < 0.0:
                        g = i
                        break
            if prev >= 0 and g != prev:
                consistent[t] = False
            prev = g
            v0 = V[g, 0]
            v1 = V[g, 1]
            y0 = v0 if abs(x0 - v0) <= eps or u == 1.0 else keep * x0 + u * v0
            y1 = v1 if abs(x1 - v1) <= eps or u == 1.0 else keep * x1 + u * v1
            total += math.sqrt((y0 - x0) ** 2 + (y1 - x1) ** 2)
            x0 = y0
            x1 = y1
            n += 1
            done = x0 == v0 and x1 == v1
        cost[t] = total
        steps[t] = n
    return cost, steps, consistent, guard


def trial_seeds(seed: int, trials: int) -> np.ndarray:
    """Per-trial 32-bit seeds derived from one master seed."""
    return np.random.SeedSequence(seed).generate_state(trials, dtype=np.uint32).astype(np.int64)


def polygon_monte_carlo(scenario: PolygonScenario, seed: int = 0) -> PolygonResult:
    """Mean total path length (in units of the one-shot cost, the circumradius)
    and the fraction of trials whose goal vertex never changed."""
    s = scenario
    cost, steps, consistent, guard = _simulate(s.vertices, float(s.u), float(s.eps),
                                               trial_seeds(seed, s.trials), int(s.max_steps))
    rel = cost / s.radius
    se = float(rel.std(ddof=1) / math.sqrt(rel.size)) if rel.size > 1 else 0.0
    return PolygonResult(s, float(rel.mean()), se, float(consistent.mean()), float(steps.mean()),
                         int(guard.sum()), rel)


def analytic_consistency_k2(u: float, terms: int = 40) -> float:
    """Probability that the two-vertex walk never switches goal.

    After i consistent steps the subject is (1-u)^i from its goal and
    2 - (1-u)^i from the other vertex, so it keeps the goal with probability
    1 - (1-u)^i / 2; the first step is a fair coin either way.
    """
    q = 1.0 - u
    return float(np.prod([1.0 - q ** i / 2.0 for i in range(1, terms + 1)]))
