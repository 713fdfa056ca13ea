"""Experiment configuration: a YAML file with dataset, model, engines, ipf and fairness sections."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .engines.selection import KINDS

ENGINE_NAMES = ("random", "genetic", "prototype", "optimal-cost", "lookup", "gradient")
STRATEGY_NAMES = ("single",) + KINDS
DEFAULT_U = (0.1, 0.3, 0.5, 0.7, 0.9, 1.0)


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "dataset": {"name": "adult", "path": None, "schema": None, "test_fraction": 0.2, "split_seed": 0},
    "model": {"kind": "forest", "n_trees": 100, "max_depth": 12, "min_leaf": 2, "seed": 0,
              "artifact": None},
    "engines": [
        {"name": name, "k": k, "strategies": strategies, "params": {}}
        for name in ("random", "genetic", "prototype")
        for k, strategies in ((1, ["single"]), (20, ["closest", "weighted", "uniform"]))
    ],
    "ipf": {"u": list(DEFAULT_U), "T": 30, "target_p": 0.5, "eps": 0.0, "master_seed": 0,
            "sample_size": 200, "relative_mode": "ratio_of_means", "workers": 1},
    "fairness": {"groups": None},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    dataset: dict
    model: dict
    engines: list
    ipf: dict
    fairness: dict
    source: str | None = field(default=None, compare=False)

    @classmethod
    def from_dict(cls, d: dict | None = None, source=None) -> "ExperimentConfig":
        d = d or {}
        unknown = set(d) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        merged = _merge(DEFAULTS, d)
        if not isinstance(merged["engines"], list) or not all(isinstance(e, dict) for e in merged["engines"]):
            raise ConfigError("engines must be a list of mappings")
        # fill per-engine defaults so equivalent configs share a digest
        merged["engines"] = [{"k": 1, "strategies": ["single"], "params": {}, **e} for e in merged["engines"]]
        cfg = cls(merged["dataset"], merged["model"], merged["engines"], merged["ipf"],
                  merged["fairness"], source)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                d = yaml.safe_load(fh) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"malformed config {path}: {e}") from e
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping of sections")
        return cls.from_dict(d, str(path))

    def validate(self) -> None:
        us = self.ipf["u"]
        if not us or any(not (0.0 < float(u) <= 1.0) for u in us):
            raise ConfigError("every u must lie in (0, 1]")
        if int(self.ipf["T"]) < 1:
            raise ConfigError("T must be >= 1")
        if not 0.5 <= float(self.ipf["target_p"]) < 1.0:
            raise ConfigError("target_p must be in [0.5, 1)")
        if int(self.ipf["sample_size"]) < 1:
            raise ConfigError("sample_size must be >= 1")
        if self.model["kind"] not in ("forest", "logistic"):
            raise ConfigError(f"unknown model kind {self.model['kind']!r}")
        if not self.engines:
            raise ConfigError("no engines configured")
        for e in self.engines:
            if e.get("name") not in ENGINE_NAMES:
                raise ConfigError(f"unknown engine {e.get('name')!r}; expected one of {ENGINE_NAMES}")
            if int(e.get("k", 1)) < 1:
                raise ConfigError("engine k must be >= 1")
            for s in e.get("strategies", ["single"]):
                if s not in STRATEGY_NAMES:
                    raise ConfigError(f"unknown strategy {s!r}; expected one of {STRATEGY_NAMES}")
                if s == "single" and int(e.get("k", 1)) != 1:
                    raise ConfigError("strategy 'single' requires k = 1")
        if self.dataset.get("name") is None and self.dataset.get("path") is None:
            raise ConfigError("dataset needs a bundled name or a path")

    def check_groups(self, available) -> list[str]:
        groups = self.fairness.get("groups")
        if groups is None:
            return list(available)
        missing = sorted(set(groups) - set(available))
        if missing:
            raise ConfigError(f"unknown group split(s) {missing}; available: {sorted(available)}")
        return list(groups)

    def to_dict(self) -> dict:
        return {"dataset": self.dataset, "model": self.model, "engines": self.engines,
                "ipf": self.ipf, "fairness": self.fairness}

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()

    def override(self, **flat) -> "ExperimentConfig":
        """Apply ``section.key=value`` style overrides (None values are skipped)."""
        d = copy.deepcopy(self.to_dict())
        for key, value in flat.items():
            if value is None:
                continue
            section, _, name = key.partition(".")
            if section not in d or not isinstance(d[section], dict):
                raise ConfigError(f"cannot override {key!r}")
            d[section][name] = value
        return ExperimentConfig.from_dict(d, self.source)


def dataset_files(cfg: ExperimentConfig) -> tuple[Path, Path]:
    from .tabular import bundled

    ds = cfg.dataset
    if ds.get("path"):
        if not ds.get("schema"):
            raise ConfigError("dataset.path needs dataset.schema")
        return Path(ds["path"]), Path(ds["schema"])
    try:
        return bundled(ds["name"])
    except FileNotFoundError as e:
        raise ConfigError(str(e)) from e
