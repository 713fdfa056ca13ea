"""Versioned JSON model artifacts."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from ..tabular import FeatureSchema, Schema
from .forest import ForestHyper, ForestModel
from .logistic import LogisticModel
from .synthetic import SyntheticModel, make_synthetic

FORMAT = "ipflab-model"
VERSION = 1


def schema_to_dict(schema: Schema) -> list[dict]:
    return [
        {"name": f.name, "kind": f.kind, "categories": list(f.categories),
         "bounds": list(f.bounds) if f.bounds is not None else None, "actionable": f.actionable}
        for f in schema
    ]


def schema_from_dict(items: list[dict]) -> Schema:
    return Schema([
        FeatureSchema(d["name"], d["kind"], tuple(d["categories"]),
                      tuple(d["bounds"]) if d["bounds"] is not None else None, d["actionable"])
        for d in items
    ])


def model_to_dict(model) -> dict:
    base = {"format": FORMAT, "version": VERSION, "schema": schema_to_dict(model.schema)}
    if isinstance(model, ForestModel):
        sizes = [_tree_size(model, t) for t in range(model.n_trees)]
        base.update(kind="forest", hyper=vars(model.hyper), trees=[
            {
                "feature": model.feature[t, :n].tolist(),
                "threshold": model.threshold[t, :n].tolist(),
                "left": model.left[t, :n].tolist(),
                "right": model.right[t, :n].tolist(),
                "value": model.value[t, :n].tolist(),
            }
            for t, n in enumerate(sizes)
        ])
    elif isinstance(model, LogisticModel):
        base.update(kind="logistic", weights=model.weights.tolist(), bias=model.bias)
    elif isinstance(model, SyntheticModel):
        base.update(kind="synthetic", spec=model.to_spec())
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return base


def _tree_size(model: ForestModel, t: int) -> int:
    # children are always appended after parents, so the last referenced node bounds the tree
    used = max(int(model.left[t].max()), int(model.right[t].max())) + 1
    return max(used, 1)


def model_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise ValueError("not an ipflab model artifact")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported model artifact version {d.get('version')}")
    schema = schema_from_dict(d["schema"])
    if d["kind"] == "forest":
        trees = d["trees"]
        size = max(len(t["feature"]) for t in trees)
        arrays = []
        for key, fill, dtype in (("feature", -1, np.int64), ("threshold", 0.0, float),
                                 ("left", 0, np.int64), ("right", 0, np.int64), ("value", 0.0, float)):
            M = np.full((len(trees), size), fill, dtype=dtype)
            for i, t in enumerate(trees):
                M[i, :len(t[key])] = t[key]
            arrays.append(M)
        return ForestModel(schema, *arrays, hyper=ForestHyper(**d["hyper"]))
    if d["kind"] == "logistic":
        return LogisticModel(schema, np.array(d["weights"]), d["bias"])
    if d["kind"] == "synthetic":
        return make_synthetic(d["spec"])
    raise ValueError(f"unknown model kind {d['kind']!r}")


def dumps(model) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))


def save_model(model, path) -> str:
    """Write the artifact and return its sha256 digest."""
    text = dumps(model)
    Path(path).write_text(text)
    return hashlib.sha256(text.encode()).hexdigest()


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
