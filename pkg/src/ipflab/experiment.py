"""The tabular IPF protocol: build model and engines from a config, simulate, and aggregate."""
from __future__ import annotations

import math
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .config import ConfigError, ExperimentConfig, dataset_files
from .cost import CostModel
from .engines import (GaParams, GeneticEngine, GeneticParams, GridSpec, GradientEngine, LookupEngine,
                      OptimalCostEngine, PrototypeEngine, RandomSearchEngine, RandomSearchParams,
                      SelectionStrategy, positive_training_candidates)
from .ipf import (ParityError, IpfConfig, batch_run, parity_ratio, success_ids, summarize)
from .models import ForestHyper, LogisticHyper, load_model, train_forest, train_logistic
from .tabular import Dataset, SchemaConfig, fit_stats, load_csv, split


@dataclass
class Context:
    name: str
    data: Dataset
    schema_config: SchemaConfig
    train: Dataset
    test: Dataset
    cost_model: CostModel
    model: object = None

    @property
    def group_specs(self) -> dict:
        return {g.name: g for g in self.schema_config.groups}


def load_context(cfg: ExperimentConfig) -> Context:
    csv_path, schema_path = dataset_files(cfg)
    sc = SchemaConfig.load(schema_path)
    data = load_csv(csv_path, sc)
    train, test = split(data, float(cfg.dataset["test_fraction"]), int(cfg.dataset["split_seed"]))
    return Context(sc.name, data, sc, train, test, CostModel(data.schema, fit_stats(train)))


def fit_model(cfg: ExperimentConfig, ctx: Context):
    m = cfg.model
    if m["kind"] == "forest":
        hyper = ForestHyper(n_trees=int(m["n_trees"]), max_depth=int(m["max_depth"]),
                            min_leaf=int(m["min_leaf"]), seed=int(m["seed"]))
        return train_forest(ctx.train, hyper=hyper)
    return train_logistic(ctx.train, hyper=LogisticHyper(**{k: v for k, v in m.items()
                                                            if k in ("learning_rate", "epochs", "l2")}))


def attach_model(cfg: ExperimentConfig, ctx: Context, artifact=None) -> Context:
    path = artifact or cfg.model.get("artifact")
    ctx.model = load_model(path) if path else fit_model(cfg, ctx)
    if ctx.model.schema != ctx.data.schema:
        raise ConfigError("model artifact schema does not match the dataset")
    return ctx


def default_positive(model, train: Dataset) -> np.ndarray:
    """The lowest-index training instance the model predicts positive."""
    pos = np.flatnonzero(model.predict(train.codes) == 1)
    if pos.size == 0:
        raise ValueError("model predicts no positive training instance")
    return train.codes[pos[0]]


def make_engine(spec: dict, ctx: Context, target_p: float = 0.5):
    name, k, params = spec["name"], int(spec.get("k", 1)), dict(spec.get("params") or {})
    model, cm = ctx.model, ctx.cost_model
    if name == "random":
        return RandomSearchEngine(model, cm, target_p, k, RandomSearchParams(**params))
    if name == "genetic":
        return GeneticEngine(model, cm, target_p, k, GeneticParams(**params))
    if name == "prototype":
        return PrototypeEngine(model, cm, positive_training_candidates(model, ctx.train), target_p, k)
    if name == "optimal-cost":
        return OptimalCostEngine(model, cm, target_p, GridSpec(**params))
    if name == "lookup":
        return LookupEngine(model, cm, positive_training_candidates(model, ctx.train), target_p, **params)
    if name == "gradient":
        return GradientEngine(model, cm, default_positive(model, ctx.train), target_p, GaParams(**params))
    raise ConfigError(f"unknown engine {name!r}")


def sample_negatives(ctx: Context, n: int, seed: int):
    """Up to ``n`` correctly classified negative test instances (sorted by row id)."""
    test = ctx.test
    idx = np.flatnonzero((ctx.model.predict(test.codes) == 0) & (test.labels == 0))
    if idx.size > n:
        idx = np.sort(np.random.default_rng(seed).choice(idx, n, replace=False))
    return test.subset(idx)


def strategy_of(name: str):
    return None if name == "single" else SelectionStrategy(name)


def run_protocol(cfg: ExperimentConfig, ctx: Context, progress=None) -> list:
    """All (engine, strategy, u) trajectories on the sampled negatives."""
    ip = cfg.ipf
    sample = sample_negatives(ctx, int(ip["sample_size"]), int(ip["master_seed"]))
    groups = cfg.check_groups(ctx.group_specs)
    group_rows = [{g: str(sample.groups[g][i]) for g in groups} for i in range(len(sample))]
    out = []
    for spec in cfg.engines:
        engine = make_engine(spec, ctx, float(ip["target_p"]))
        for s in spec.get("strategies", ["single"]):
            configs = [IpfConfig(float(u), int(ip["T"]), float(ip["target_p"]), float(ip["eps"]),
                                 strategy_of(s), int(ip["master_seed"])) for u in ip["u"]]
            runs = batch_run(sample.codes, ctx.model, engine, configs, ctx.cost_model,
                             int(ip["master_seed"]), sample.row_ids, group_rows, int(ip.get("workers", 1)))
            out.extend(runs)
            if progress:
                progress(f"{ctx.name} {engine.name} k={engine.k} {s}: {len(runs)} runs")
    return out


# --------------------------------------------------------------------------- aggregation

REQUIRED_COLUMNS = ("dataset", "input_id", "engine", "k", "strategy", "u", "steps", "success",
                    "total_cost", "groups")


class ReportError(ValueError):
    pass


def records_of(trajectories, dataset: str, schema=None) -> list[dict]:
    recs = []
    for t in trajectories:
        r = t.to_record(schema)
        r["dataset"] = dataset
        recs.append(r)
    return recs


def check_records(records) -> None:
    for i, r in enumerate(records):
        for col in REQUIRED_COLUMNS:
            if col not in r:
                raise ReportError(f"record {i} lacks required column {col!r}")


def _runs(records):
    return [SimpleNamespace(**r) for r in records]


def setup_key(r) -> tuple:
    return (r.dataset, r.engine, int(r.k), r.strategy)


def _datasets(records):
    """Per dataset: runs grouped by (dataset, engine, k, strategy, u), and the common-success ids."""
    check_records(records)
    runs = _runs(records)
    for ds in sorted({r.dataset for r in runs}):
        cells = {}
        for r in runs:
            if r.dataset == ds:
                cells.setdefault(setup_key(r) + (float(r.u),), []).append(r)
        common = set.intersection(*[success_ids(v) for v in cells.values()])
        keys = sorted(cells, key=lambda k: (k[1], k[2], k[3], k[4]))
        yield ds, cells, keys, common


def _parity(cell, base, group, spec, common, mode) -> dict:
    adv, dis = spec.values
    out = {}
    for metric in ("relative_cost", "steps"):
        try:
            out[metric] = parity_ratio(cell, group, dis, metric, base, common, adv, mode)
        except (ParityError, ValueError):
            out[metric] = math.nan
    return out


def _head(key) -> dict:
    return {"dataset": key[0], "engine": key[1], "k": key[2], "strategy": key[3], "u": key[4]}


def summary_rows(records, group_specs: dict | None = None, mode: str = "ratio_of_means") -> list[dict]:
    """One row per (dataset, engine, k, strategy, u).

    Costs and steps use, per dataset, the inputs on which every setup and
    every u succeeds. Parity ratios take the second listed value of each group
    split as the disadvantaged group.
    """
    rows = []
    for ds, cells, keys, common in _datasets(records):
        for key in keys:
            base = cells.get(key[:4] + (1.0,))
            row = _head(key)
            if base is None:
                row["success_rate"] = float(np.mean([r.success for r in cells[key]]))
            else:
                row.update(summarize(cells[key], base, common, mode).as_dict())
            for g, spec in (group_specs or {}).items():
                for metric, val in _parity(cells[key], base, g, spec, common, mode).items():
                    row[f"parity_{g}_{metric}"] = val
            rows.append(row)
    return rows


def tidy_rows(records, mode: str = "ratio_of_means") -> list[dict]:
    """Long-format aggregates keyed by (dataset, engine, k, strategy, u, group, value)."""
    out = []
    for ds, cells, keys, common in _datasets(records):
        gnames = sorted({g for v in cells.values() for r in v for g in r.groups})
        for key in keys:
            base = cells.get(key[:4] + (1.0,))
            if base is None:
                continue
            rep = summarize(cells[key], base, common, mode, gnames)
            parts = [("all", "all", rep)] + [(g, v, r) for g in gnames for v, r in rep.groups[g].items()]
            for g, v, r in parts:
                out.append({**_head(key), "group": g, "value": v, **r.as_dict()})
    return out


def parity_rows(records, group_specs_by_dataset: dict, mode: str = "ratio_of_means") -> list[dict]:
    """Parity ratios for every group split of every dataset."""
    out = []
    for ds, cells, keys, common in _datasets(records):
        for key in keys:
            base = cells.get(key[:4] + (1.0,))
            for g, spec in group_specs_by_dataset.get(ds, {}).items():
                row = {**_head(key), "group": g, "advantaged": spec.values[0],
                       "disadvantaged": spec.values[1]}
                row.update(_parity(cells[key], base, g, spec, common, mode))
                out.append(row)
    return out
