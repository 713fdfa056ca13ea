"""Period-2 oscillation of gradient-based CFs under partial fulfillment.

The landscape is a point-symmetric pair of curved ridges of rbf bumps. Each
ridge climbs from just beside the origin, arcs over and ends at a peak on the
far side, so the descent from x1 ends at roughly -3 x1 and the halfway point
-x1 lies at the foot of the mirrored ridge, whose descent leads back.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..cost import CostModel
from ..engines import GaParams, GradientEngine
from ..ipf import IpfConfig, Trajectory, run_ipf
from ..models import make_synthetic
from ..models.base import THRESHOLD
from ..tabular import DATA_DIR, uniform_stats

FIXTURE_PATH = DATA_DIR / "oscillation_fixture.json"
FIXTURE_VERSION = 1


@dataclass
class OscillationFixture:
    model: dict
    x1: list
    x2: list
    u: float = 0.5
    eps: float = 0.0
    ga: dict = field(default_factory=dict)
    period: int = 2
    version: int = FIXTURE_VERSION
    search: dict = field(default_factory=dict)

    def build(self):
        """(model, cost_model, engine) described by the fixture."""
        model = make_synthetic(self.model)
        cm = CostModel(model.schema, uniform_stats(model.schema))
        params = GaParams(**self.ga)
        peak = np.asarray(self.x1, dtype=float)
        engine = GradientEngine(model, cm, peak, 0.5, params)
        return model, cm, engine

    def save(self, path=FIXTURE_PATH) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path=FIXTURE_PATH) -> "OscillationFixture":
        return cls(**json.loads(Path(path).read_text()))


def s_ridge_spec(a: float, b: float, n: int, width: float, h0: float, h1: float, bias: float,
                 gamma: float = 1.0, half: float = 4.0) -> dict:
    """Two mirrored arcs of ``n`` bumps; the first climbs from (a, 0) over
    height ``b`` to a peak at (-3a, 0)."""
    theta = np.linspace(0.0, np.pi, n + 1)[1:]
    arc = np.column_stack([-a + 2 * a * np.cos(theta), b * np.sin(theta)])
    heights = h0 + (h1 - h0) * np.linspace(0.0, 1.0, n) ** gamma
    centers = np.vstack([arc, -arc])
    return {"family": "rbf_mixture", "centers": centers.tolist(), "widths": [width] * (2 * n),
            "heights": np.concatenate([heights, heights]).tolist(), "bias": bias,
            "bounds": [[-half, half], [-half, half]]}


def step_map(engine, x, u: float, eps: float = 0.0):
    """One IPF round with a deterministic all-numerical engine: (next state, CF)."""
    res = engine.explain(x)
    cf = res.codes[0]
    w = (1 - u) * x + u * cf
    snap = np.abs(x - cf) <= eps
    w[snap] = cf[snap]
    return w, cf, bool(res.degenerate)


def detect_cycle(states, tolerance: float = 1e-6, max_period: int | None = None, min_period: int = 2):
    """Smallest period p >= ``min_period`` such that the last 2p states repeat
    within ``tolerance`` and the repeating block is not a single point."""
    S = np.asarray(states.states if isinstance(states, Trajectory) else states, dtype=float)
    S = S.reshape(len(S), -1)
    max_period = max_period or len(S) // 2
    for p in range(min_period, max_period + 1):
        if 2 * p > len(S):
            break
        block, prev = S[-p:], S[-2 * p:-p]
        if np.max(np.abs(block - prev)) > tolerance:
            continue
        spread = np.max(np.abs(block - block[0]))
        if spread > tolerance:
            return p
    return None


def _candidate(rng, ranges):
    def pick(name):
        lo, hi = ranges[name]
        return float(lo + (hi - lo) * rng.random())
    return s_ridge_spec(pick("a"), pick("b"), int(rng.integers(ranges["n"][0], ranges["n"][1] + 1)),
                        pick("width"), pick("h0"), pick("h1"), pick("bias"), pick("gamma"))


DEFAULT_RANGES = {"a": (0.5, 0.7), "b": (1.0, 1.4), "n": (10, 10), "width": (0.28, 0.4),
                  "h0": (1.2, 2.0), "h1": (6.0, 8.0), "bias": (-5.5, -4.5), "gamma": (1.5, 2.5)}
DEFAULT_GA = {"lam": 10.0, "step": 0.002, "max_iters": 20000, "tol": 1e-12}


def check_cycle(spec: dict, x0, ga: dict, u: float = 0.5, iters: int = 40, tol: float = 1e-9):
    """Iterate the IPF map from ``x0``; return (x1, x2) if it settles on a
    period-2 cycle of negative states whose CFs are valid, else None."""
    fx = OscillationFixture(spec, list(x0), list(x0), u, 0.0, ga)
    model, cm, engine = fx.build()
    x = np.asarray(x0, dtype=float)
    hist = [x]
    for _ in range(iters):
        if model.proba_one(x) >= THRESHOLD:
            return None
        x, cf, degenerate = step_map(engine, x, u)
        if degenerate:
            return None
        hist.append(x)
    if detect_cycle(hist, tol) != 2:
        return None
    x1, x2 = hist[-2], hist[-1]
    if model.proba_one(x1) >= THRESHOLD or model.proba_one(x2) >= THRESHOLD:
        return None
    return x1, x2


def find_oscillation_fixture(attempts: int = 50, seed: int = 0, ranges: dict | None = None,
                             ga: dict | None = None, u: float = 0.5):
    """Randomized search over S-ridge landscapes; returns the first fixture whose
    replay cycles with period 2, or None when the attempts are exhausted."""
    ranges = {**DEFAULT_RANGES, **(ranges or {})}
    ga = {**DEFAULT_GA, **(ga or {})}
    rng = np.random.default_rng(seed)
    for attempt in range(attempts):
        spec = _candidate(rng, ranges)
        a = -spec["centers"][len(spec["centers"]) // 2 - 1][0] / 3
        found = check_cycle(spec, [a, 0.0], ga, u)
        if found is None:
            continue
        x1, x2 = found
        return OscillationFixture(spec, x1.tolist(), x2.tolist(), u, 0.0, ga, 2,
                                  search={"seed": seed, "attempt": attempt, "ranges": ranges})
    return None


def replay(fixture: OscillationFixture, T: int = 30) -> Trajectory:
    model, cm, engine = fixture.build()
    cfg = IpfConfig(fixture.u, T, 0.5, fixture.eps)
    return run_ipf(np.asarray(fixture.x1, dtype=float), model, engine, cfg, cm)


def one_shot_cost(fixture: OscillationFixture) -> float:
    model, cm, engine = fixture.build()
    x1 = np.asarray(fixture.x1, dtype=float)
    return float(cm.costs(x1, engine.explain(x1).codes[0]))
