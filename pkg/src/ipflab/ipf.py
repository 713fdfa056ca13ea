"""Iterative partial fulfillment: simulation, batch driver, welfare and parity metrics."""
from __future__ import annotations

import csv
import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engines.selection import NoValidCandidateError, SelectionStrategy, select_index
from .fulfillment import EffortLevel, fulfill_codes
from .models.base import THRESHOLD


@dataclass(frozen=True)
class IpfConfig:
    """One IPF setting. ``strategy=None`` means a single CF per query."""

    u: float
    T: int = 30
    target_p: float = 0.5
    eps: float = 0.0
    strategy: SelectionStrategy | None = None
    seed: int = 0

    def __post_init__(self):
        EffortLevel(self.u)
        if self.T < 1:
            raise ValueError("T must be >= 1")

    @property
    def strategy_name(self) -> str:
        return "single" if self.strategy is None else self.strategy.kind

    def key(self, engine_name: str = "") -> int:
        """Stable 32-bit identifier of the setting (and engine), used for seed derivation."""
        text = f"{engine_name}|{self.strategy_name}|{self.u!r}|{self.T}|{self.target_p!r}|{self.eps!r}"
        return zlib.crc32(text.encode())


@dataclass
class Trajectory:
    states: np.ndarray
    goals: np.ndarray
    success: bool
    total_cost: float
    seed: tuple = ()
    failure: str = ""
    input_id: int = -1
    engine: str = ""
    k: int = 1
    config: IpfConfig | None = None
    groups: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.goals)

    def to_record(self, schema=None) -> dict:
        names = schema.names if schema is not None else None
        deltas = []
        for a, b in zip(self.states[:-1], self.states[1:]):
            ch = np.flatnonzero(a != b)
            deltas.append({(names[d] if names else str(d)): float(b[d]) for d in ch})
        c = self.config
        return {
            "input_id": int(self.input_id), "config_id": c.key(f"{self.engine}/{self.k}") if c else None,
            "u": c.u if c else None, "engine": self.engine, "k": int(self.k),
            "strategy": c.strategy_name if c else None, "steps": self.steps,
            "success": bool(self.success), "total_cost": float(self.total_cost),
            "failure": self.failure, "groups": dict(self.groups),
            "start": [float(v) for v in self.states[0]], "deltas": deltas,
        }


def run_ipf(z: np.ndarray, model, engine, config: IpfConfig, cost_model,
            rng: np.random.Generator | None = None) -> Trajectory:
    """Simulate one subject: query, select, partially fulfill, repeat.

    Stops as soon as the model predicts positive or after ``T`` rounds. An
    engine failure ends the run unsuccessfully, with the reason recorded.
    Every random draw (engine, selection, categorical flips) comes from ``rng``.
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    cat = model.schema.categorical_mask
    strategy = config.strategy or SelectionStrategy("closest")
    x = np.asarray(z, dtype=float)
    states, goals = [x], []
    failure = ""
    while model.proba_one(x) < THRESHOLD and len(goals) < config.T:
        res = engine.explain(x, rng)
        if res.failed:
            failure = res.reason or "engine failure"
            break
        try:
            goal = res.codes[select_index(x, res, strategy, cost_model, rng)]
        except NoValidCandidateError as e:
            failure = str(e)
            break
        x = fulfill_codes(x, goal, config.u, config.eps, cat, rng)
        states.append(x)
        goals.append(goal)
    S = np.array(states)
    G = np.array(goals).reshape(len(goals), S.shape[1])
    success = model.proba_one(x) >= THRESHOLD
    return Trajectory(S, G, bool(success), cost_model.pairwise_path_cost(S), failure=failure, config=config)


def run_seed(master_seed: int, input_id: int, config_key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(int(input_id), int(config_key))))


def _run_one(job):
    z, input_id, model, engine, config, cost_model, master_seed, groups = job
    key = config.key(f"{engine.name}/{engine.k}")
    try:
        tr = run_ipf(z, model, engine, config, cost_model, run_seed(master_seed, input_id, key))
    except Exception as e:  # recorded, never aborts the batch
        tr = Trajectory(np.asarray(z, dtype=float)[None, :], np.zeros((0, len(z))), False, 0.0,
                        failure=f"{type(e).__name__}: {e}", config=config)
    tr.seed = (master_seed, int(input_id), key)
    tr.input_id = int(input_id)
    tr.engine = engine.name
    tr.k = engine.k
    tr.groups = groups
    return tr


def batch_run(inputs: np.ndarray, model, engine, configs, cost_model, master_seed: int = 0,
              input_ids=None, groups=None, workers: int = 1) -> list[Trajectory]:
    """One trajectory per (input, config), ordered input-major.

    Each run's stream depends only on (master seed, input id, config key), so
    results do not depend on input order or on how runs are distributed.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    ids = np.arange(len(inputs)) if input_ids is None else np.asarray(input_ids)
    groups = groups if groups is not None else [{} for _ in range(len(inputs))]
    jobs = [(z, i, model, engine, c, cost_model, master_seed, g)
            for z, i, g in zip(inputs, ids, groups) for c in configs]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_run_one(j) for j in jobs]


# --------------------------------------------------------------------------- metrics


RATIO_OF_MEANS = "ratio_of_means"
MEAN_OF_RATIOS = "mean_of_ratios"


@dataclass
class MetricsReport:
    n_runs: int
    success_rate: float
    n_common: int
    mean_total_cost: float
    relative_cost: float
    relative_cost_se: float
    mean_steps: float
    steps_se: float
    empty: bool = False
    groups: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("n_runs", "success_rate", "n_common", "mean_total_cost",
                                           "relative_cost", "relative_cost_se", "mean_steps", "steps_se", "empty")}
        return d


def _se(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def relative_cost(costs, base, mode: str = RATIO_OF_MEANS) -> tuple[float, float]:
    """Relative total cost and its standard error over paired runs."""
    a, b = np.asarray(costs, dtype=float), np.asarray(base, dtype=float)
    if a.size == 0:
        return math.nan, math.nan
    if mode == MEAN_OF_RATIOS:
        keep = b > 0
        r = a[keep] / b[keep]
        return (float(r.mean()), _se(r)) if r.size else (math.nan, math.nan)
    if mode != RATIO_OF_MEANS:
        raise ValueError(f"unknown relative cost mode {mode!r}")
    ma, mb = a.mean(), b.mean()
    if mb == 0:
        return math.nan, math.nan
    ratio = ma / mb
    # delta method for a ratio of paired means
    if a.size > 1:
        cov = np.cov(a, b, ddof=1)
        var = (cov[0, 0] - 2 * ratio * cov[0, 1] + ratio ** 2 * cov[1, 1]) / (mb ** 2 * a.size)
        se = float(math.sqrt(max(var, 0.0)))
    else:
        se = 0.0
    return float(ratio), se


def success_ids(trajectories) -> set:
    return {t.input_id for t in trajectories if t.success}


def summarize(trajectories, baseline, common: set | None = None, mode: str = RATIO_OF_MEANS,
              group_names=()) -> MetricsReport:
    """Welfare metrics of one setup against its u=1 baseline.

    Cost and step metrics use ``common`` (default: inputs on which both the
    setup and the baseline succeed). ``group_names`` adds per-group reports,
    each relative to the same group's baseline runs.
    """
    trajectories, baseline = list(trajectories), list(baseline)
    by_base = {t.input_id: t for t in baseline}
    missing = {t.input_id for t in trajectories} - set(by_base)
    if missing:
        raise ValueError(f"baseline lacks {len(missing)} input(s)")
    if common is None:
        common = success_ids(trajectories) & success_ids(baseline)
    rows = [t for t in trajectories if t.input_id in common and t.success]
    n = len(trajectories)
    rate = float(np.mean([t.success for t in trajectories])) if n else math.nan
    costs = [t.total_cost for t in rows]
    base = [by_base[t.input_id].total_cost for t in rows]
    steps = [t.steps for t in rows]
    rel, rel_se = relative_cost(costs, base, mode)
    report = MetricsReport(
        n_runs=n, success_rate=rate, n_common=len(rows),
        mean_total_cost=float(np.mean(costs)) if rows else math.nan,
        relative_cost=rel, relative_cost_se=rel_se,
        mean_steps=float(np.mean(steps)) if rows else math.nan, steps_se=_se(steps),
        empty=not rows,
    )
    for g in group_names:
        values = sorted({t.groups.get(g) for t in trajectories} - {None})
        report.groups[g] = {
            v: summarize([t for t in trajectories if t.groups.get(g) == v],
                         [b for b in baseline if b.groups.get(g) == v], common, mode)
            for v in values
        }
    return report


class ParityError(ValueError):
    pass


def parity_ratio(trajectories, group: str, disadvantaged, metric: str = "relative_cost",
                 baseline=None, common: set | None = None, advantaged=None,
                 mode: str = RATIO_OF_MEANS) -> float:
    """Mean ``metric`` in the disadvantaged group over that in the advantaged group.

    ``relative_cost`` is computed within each group against the group's own
    baseline runs; ``steps`` averages successful runs in ``common``.
    """
    trajectories = list(trajectories)
    values = {t.groups.get(group) for t in trajectories} - {None}
    if advantaged is None:
        others = sorted(values - {disadvantaged})
        if len(others) != 1:
            raise ParityError(f"cannot infer the advantaged value of {group!r} from {sorted(values)}")
        advantaged = others[0]
    means = []
    for v in (disadvantaged, advantaged):
        tr = [t for t in trajectories if t.groups.get(group) == v]
        if metric == "relative_cost":
            if baseline is None:
                raise ValueError("relative_cost parity needs baseline runs")
            r = summarize(tr, [b for b in baseline if b.groups.get(group) == v], common, mode)
            val, empty = r.relative_cost, r.empty
        elif metric == "steps":
            ok = [t.steps for t in tr if t.success and (common is None or t.input_id in common)]
            val, empty = (float(np.mean(ok)) if ok else math.nan), not ok
        else:
            raise ValueError(f"unknown parity metric {metric!r}")
        if empty:
            raise ParityError(f"group {group}={v!r} has no runs in the comparison set")
        means.append(val)
    if means[1] == 0:
        raise ParityError("advantaged group mean is zero")
    return float(means[0] / means[1])


# --------------------------------------------------------------------------- I/O


def dumps_records(trajectories, schema=None) -> str:
    return "".join(json.dumps(t.to_record(schema), sort_keys=True) + "\n" for t in trajectories)


def write_jsonl(path, trajectories, schema=None) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_records(trajectories, schema))


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("no rows to write")
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
