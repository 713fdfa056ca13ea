"""Typed tabular data: feature schema, instances, datasets, empirical statistics.

Instances are exchanged in two forms. ``Instance`` holds the human-readable
values (category labels, raw numbers). Internally everything runs on *code
vectors*: one float per feature, the category index for categorical features and
the raw value for numerical ones. ``Schema.to_codes`` / ``Schema.from_codes``
convert between the two.
"""
from __future__ import annotations

import csv
import gzip
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

CATEGORICAL = "categorical"
NUMERICAL = "numerical"


class SchemaError(ValueError):
    """Raised when data or configuration does not conform to a schema."""


@dataclass(frozen=True)
class FeatureSchema:
    name: str
    kind: str
    categories: tuple[str, ...] = ()
    bounds: tuple[float, float] | None = None
    actionable: bool = True

    def __post_init__(self):
        if self.kind == CATEGORICAL:
            if len(self.categories) < 2:
                raise SchemaError(f"categorical feature {self.name!r} needs >= 2 categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"duplicate categories in {self.name!r}")
        elif self.kind == NUMERICAL:
            if self.bounds is not None and not self.bounds[0] <= self.bounds[1]:
                raise SchemaError(f"numerical feature {self.name!r} has min > max")
        else:
            raise SchemaError(f"unknown feature kind {self.kind!r}")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL


@dataclass(frozen=True)
class Instance:
    values: tuple
    index: int | None = None

    def __len__(self):
        return len(self.values)

    def __getitem__(self, d):
        return self.values[d]


class Schema(Sequence):
    """Ordered collection of ``FeatureSchema`` with vectorised helpers."""

    def __init__(self, features: Sequence[FeatureSchema]):
        self.features = tuple(features)
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        self._pos = {n: d for d, n in enumerate(names)}
        self._cat_index = [
            {c: i for i, c in enumerate(f.categories)} if f.is_categorical else None
            for f in self.features
        ]
        self.categorical_mask = np.array([f.is_categorical for f in self.features], dtype=bool)
        self.numerical_mask = ~self.categorical_mask
        self.actionable_mask = np.array([f.actionable for f in self.features], dtype=bool)
        lo, hi = [], []
        for f in self.features:
            if f.is_categorical:
                lo.append(0.0)
                hi.append(float(len(f.categories) - 1))
            else:
                b = f.bounds if f.bounds is not None else (-math.inf, math.inf)
                lo.append(float(b[0]))
                hi.append(float(b[1]))
        self.lower = np.array(lo)
        self.upper = np.array(hi)
        self.n_categories = np.array([len(f.categories) for f in self.features], dtype=np.int64)

    def __len__(self):
        return len(self.features)

    def __getitem__(self, d):
        return self.features[d]

    def __eq__(self, other):
        return isinstance(other, Schema) and self.features == other.features

    def __hash__(self):
        return hash(self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def position(self, name: str) -> int:
        return self._pos[name]

    def code_of(self, d: int, value) -> float:
        f = self.features[d]
        if f.is_categorical:
            try:
                return float(self._cat_index[d][value])
            except KeyError:
                raise SchemaError(f"value {value!r} not a category of {f.name!r}") from None
        v = float(value)
        if not math.isfinite(v):
            raise SchemaError(f"non-finite value for {f.name!r}")
        return v

    def value_of(self, d: int, code: float):
        f = self.features[d]
        if f.is_categorical:
            return f.categories[int(round(code))]
        return float(code)

    def to_codes(self, instance: Instance | Sequence) -> np.ndarray:
        values = instance.values if isinstance(instance, Instance) else tuple(instance)
        if len(values) != len(self):
            raise SchemaError(f"expected {len(self)} values, got {len(values)}")
        return np.array([self.code_of(d, v) for d, v in enumerate(values)])

    def from_codes(self, codes: np.ndarray, index: int | None = None) -> Instance:
        return Instance(tuple(self.value_of(d, c) for d, c in enumerate(codes)), index)

    def validate_codes(self, Z: np.ndarray) -> None:
        Z = np.atleast_2d(Z)
        if Z.shape[1] != len(self):
            raise SchemaError("code width does not match schema")
        cat = Z[:, self.categorical_mask]
        if cat.size and (np.any(cat < 0) or np.any(cat != np.round(cat))
                         or np.any(cat > self.upper[self.categorical_mask])):
            raise SchemaError("invalid category code")
        if not np.all(np.isfinite(Z)):
            raise SchemaError("non-finite numerical value")


@dataclass(frozen=True)
class GroupSpec:
    """A demographic split: ``values = (advantaged, disadvantaged)``."""

    name: str
    column: str
    mapping: dict
    values: tuple[str, str]
    default: str | None = None

    def assign(self, raw: str) -> str:
        if raw in self.mapping:
            return self.mapping[raw]
        if self.default is not None:
            return self.default
        raise SchemaError(f"group {self.name!r}: unmapped value {raw!r}")


@dataclass
class Dataset:
    schema: Schema
    codes: np.ndarray
    labels: np.ndarray
    groups: dict[str, np.ndarray] = field(default_factory=dict)
    row_ids: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.row_ids is None:
            self.row_ids = np.arange(len(self.labels))
        if self.codes.ndim != 2 or self.codes.shape[0] != len(self.labels):
            raise SchemaError("|labels| must equal |rows|")
        if not np.isin(self.labels, (0, 1)).all():
            raise SchemaError("labels must be binary")
        if len(self.labels):
            self.schema.validate_codes(self.codes)
        for g, vals in self.groups.items():
            if len(vals) != len(self.labels):
                raise SchemaError(f"group column {g!r} has wrong length")

    def __len__(self):
        return len(self.labels)

    @property
    def rows(self) -> list[Instance]:
        return [self.schema.from_codes(z, int(i)) for z, i in zip(self.codes, self.row_ids)]

    def instance(self, i: int) -> Instance:
        return self.schema.from_codes(self.codes[i], int(self.row_ids[i]))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.schema, self.codes[idx], self.labels[idx],
                       {g: v[idx] for g, v in self.groups.items()}, self.row_ids[idx], self.name)


# --------------------------------------------------------------------------- config / csv


@dataclass
class SchemaConfig:
    name: str
    label_column: str
    positive_label: str
    features: list[dict]
    groups: list[GroupSpec]
    ignore: list[str] = field(default_factory=list)
    allow_new_categories: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "SchemaConfig":
        try:
            groups = [
                GroupSpec(g["name"], g["column"], dict(g.get("map", {})), tuple(g["values"]),
                          g.get("default"))
                for g in d.get("groups", [])
            ]
            return cls(
                name=d.get("name", "dataset"),
                label_column=d["label"]["column"],
                positive_label=str(d["label"]["positive"]),
                features=list(d["features"]),
                groups=groups,
                ignore=list(d.get("ignore", [])),
                allow_new_categories=bool(d.get("allow_new_categories", False)),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "SchemaConfig":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", newline="")
    return open(path, newline="")


def load_csv(path, schema_config: SchemaConfig | dict | str | Path) -> Dataset:
    """Read an RFC-4180 CSV into a validated ``Dataset``.

    Numerical bounds are the observed range in the file. Categories come from
    the config when listed (unseen labels are rejected unless
    ``allow_new_categories``), otherwise from the sorted distinct values.
    """
    path = Path(path)
    if isinstance(schema_config, (str, Path)):
        schema_config = SchemaConfig.load(schema_config)
    elif isinstance(schema_config, dict):
        schema_config = SchemaConfig.from_dict(schema_config)
    cfg = schema_config
    if not path.exists():
        raise FileNotFoundError(path)
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty CSV") from None
        raw = [r for r in reader if r]
    expected = [f["name"] for f in cfg.features] + [cfg.label_column] + cfg.ignore
    if sorted(header) != sorted(expected):
        missing = sorted(set(expected) - set(header))
        extra = sorted(set(header) - set(expected))
        raise SchemaError(f"column mismatch: missing={missing} unexpected={extra}")
    col = {h: j for j, h in enumerate(header)}
    for r in raw:
        if len(r) != len(header):
            raise SchemaError(f"ragged row: {r}")

    features, columns = [], []
    for f in cfg.features:
        cells = [r[col[f["name"]]] for r in raw]
        if any(c == "" for c in cells):
            raise SchemaError(f"missing value in column {f['name']!r}")
        kind = f["kind"]
        if kind == NUMERICAL:
            try:
                vals = np.array([float(c) for c in cells])
            except ValueError as exc:
                raise SchemaError(f"unparsable numerical cell in {f['name']!r}: {exc}") from None
            if not np.all(np.isfinite(vals)):
                raise SchemaError(f"non-finite value in {f['name']!r}")
            bounds = (float(vals.min()), float(vals.max())) if len(vals) else (0.0, 0.0)
            features.append(FeatureSchema(f["name"], NUMERICAL, (), bounds, bool(f.get("actionable", True))))
            columns.append(vals)
        else:
            cats = [str(c) for c in f.get("categories", [])]
            seen = sorted(set(cells))
            if cats:
                unseen = [c for c in seen if c not in cats]
                if unseen and not cfg.allow_new_categories:
                    raise SchemaError(f"unseen categories in {f['name']!r}: {unseen}")
                cats = cats + unseen
            else:
                cats = seen
            lookup = {c: i for i, c in enumerate(cats)}
            features.append(FeatureSchema(f["name"], CATEGORICAL, tuple(cats), None, bool(f.get("actionable", True))))
            columns.append(np.array([lookup[c] for c in cells], dtype=float))

    label_cells = [r[col[cfg.label_column]] for r in raw]
    distinct = set(label_cells)
    if len(distinct) > 2 or (distinct and cfg.positive_label not in distinct and len(distinct) == 2):
        raise SchemaError(f"label column is not binary: {sorted(distinct)[:5]}")
    labels = np.array([1 if c == cfg.positive_label else 0 for c in label_cells])
    groups = {g.name: np.array([g.assign(r[col[g.column]]) for r in raw]) for g in cfg.groups}
    codes = np.column_stack(columns) if columns else np.zeros((len(raw), 0))
    return Dataset(Schema(features), codes, labels, groups, np.arange(len(raw)), cfg.name)


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle split; the test part has ``floor(n * test_fraction)`` rows."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    n = len(dataset)
    n_test = int(math.floor(n * test_fraction))
    if n_test == 0 or n_test == n:
        raise ValueError("split would produce an empty partition")
    perm = np.random.default_rng(seed).permutation(n)
    return dataset.subset(np.sort(perm[n_test:])), dataset.subset(np.sort(perm[:n_test]))


# --------------------------------------------------------------------------- statistics


class EmpiricalCdf:
    """F(v) = fraction of training values <= v, linear between distinct knots.

    Below the smallest knot F is 0; at/above the largest it is 1.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            self.knots = np.zeros(0)
            self.fractions = np.zeros(0)
            return
        knots, counts = np.unique(values, return_counts=True)
        self.knots = knots
        self.fractions = np.cumsum(counts) / values.size

    @classmethod
    def from_knots(cls, knots, fractions) -> "EmpiricalCdf":
        obj = cls.__new__(cls)
        obj.knots = np.asarray(knots, dtype=float)
        obj.fractions = np.asarray(fractions, dtype=float)
        return obj

    def __call__(self, v):
        if self.knots.size == 0:
            return np.zeros_like(np.asarray(v, dtype=float))
        out = np.interp(v, self.knots, self.fractions, left=0.0, right=1.0)
        return out if np.ndim(out) else float(out)

    def __repr__(self):
        return f"EmpiricalCdf(n_knots={self.knots.size})"


@dataclass
class FeatureStats:
    cdf: EmpiricalCdf | None = None
    mad: float | None = None
    category_frequencies: np.ndarray | None = None

    @property
    def mad_weight(self) -> float:
        """Inverse MAD, or 1.0 when the MAD is zero."""
        if self.mad is None or self.mad <= 0:
            return 1.0
        return 1.0 / self.mad


def median_absolute_deviation(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.median(np.abs(values - np.median(values))))


def fit_stats(train: Dataset) -> list[FeatureStats]:
    if len(train) == 0:
        raise ValueError("cannot fit statistics on an empty dataset")
    stats = []
    for d, f in enumerate(train.schema):
        col = train.codes[:, d]
        if f.is_categorical:
            freq = np.bincount(col.astype(np.int64), minlength=len(f.categories)) / len(col)
            stats.append(FeatureStats(category_frequencies=freq))
        else:
            stats.append(FeatureStats(cdf=EmpiricalCdf(col), mad=median_absolute_deviation(col)))
    return stats


# --------------------------------------------------------------------------- encoding


class Encoder:
    """One-hot categorical blocks followed in schema order by min-max numericals.

    Column order is the schema order; a categorical feature with ``c`` categories
    contributes ``c`` consecutive columns.
    """

    def __init__(self, schema: Schema):
        self.schema = schema
        col_feature, col_category, lo, span = [], [], [], []
        self.blocks = []
        for d, f in enumerate(schema):
            start = len(col_feature)
            if f.is_categorical:
                for c in range(len(f.categories)):
                    col_feature.append(d)
                    col_category.append(c)
                    lo.append(0.0)
                    span.append(1.0)
            else:
                b0, b1 = f.bounds if f.bounds is not None else (0.0, 1.0)
                col_feature.append(d)
                col_category.append(-1)
                lo.append(b0)
                span.append(b1 - b0 if b1 > b0 else 1.0)
            self.blocks.append((start, len(col_feature)))
        self.col_feature = np.array(col_feature, dtype=np.int64)
        self.col_category = np.array(col_category, dtype=np.int64)
        self.col_lo = np.array(lo)
        self.col_span = np.array(span)
        self.width = len(col_feature)

    def encode_codes(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        single = Z.ndim == 1
        Z = np.atleast_2d(Z)
        raw = Z[:, self.col_feature]
        onehot = self.col_category >= 0
        out = np.empty_like(raw)
        out[:, onehot] = (raw[:, onehot] == self.col_category[onehot]).astype(float)
        out[:, ~onehot] = (raw[:, ~onehot] - self.col_lo[~onehot]) / self.col_span[~onehot]
        return out[0] if single else out

    def decode_codes(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Z = np.empty((X.shape[0], len(self.schema)))
        for d, (a, b) in enumerate(self.blocks):
            if self.schema[d].is_categorical:
                Z[:, d] = np.argmax(X[:, a:b], axis=1)
            else:
                Z[:, d] = X[:, a] * self.col_span[a] + self.col_lo[a]
        return Z

    def encode(self, instance: Instance) -> np.ndarray:
        return self.encode_codes(self.schema.to_codes(instance))

    def decode(self, vector: np.ndarray, index: int | None = None) -> Instance:
        return self.schema.from_codes(self.decode_codes(vector)[0], index)


def encode(instance: Instance, schema: Schema) -> np.ndarray:
    return Encoder(schema).encode(instance)


def decode(vector: np.ndarray, schema: Schema) -> Instance:
    return Encoder(schema).decode(vector)


def numerical_schema(names: Sequence[str], bounds: Sequence[tuple[float, float]],
                     actionable: Sequence[bool] | None = None) -> Schema:
    """All-numerical schema for synthetic theory domains."""
    actionable = actionable if actionable is not None else [True] * len(names)
    return Schema([FeatureSchema(n, NUMERICAL, (), (float(b[0]), float(b[1])), a)
                   for n, b, a in zip(names, bounds, actionable)])


def uniform_stats(schema: Schema) -> list[FeatureStats]:
    """Stats for a synthetic domain: the uniform distribution over each feature's bounds.

    The CDF is exactly linear from 0 at the lower bound to 1 at the upper
    bound; the MAD is a quarter of the range. Categories get equal frequency.
    """
    out = []
    for f in schema:
        if f.is_categorical:
            out.append(FeatureStats(category_frequencies=np.full(len(f.categories), 1 / len(f.categories))))
        else:
            lo, hi = f.bounds
            out.append(FeatureStats(cdf=EmpiricalCdf.from_knots([lo, hi], [0.0, 1.0]), mad=(hi - lo) / 4))
    return out


DATA_DIR = Path(__file__).with_name("data")


def bundled(name: str) -> tuple[Path, Path]:
    """Paths of a bundled dataset (``adult`` or ``german``): (csv, schema yaml)."""
    csv_path, cfg_path = DATA_DIR / f"{name}.csv", DATA_DIR / f"{name}.yaml"
    if not csv_path.exists():
        raise FileNotFoundError(f"no bundled dataset {name!r}")
    return csv_path, cfg_path


def load_bundled(name: str) -> Dataset:
    csv_path, cfg_path = bundled(name)
    return load_csv(csv_path, cfg_path)
