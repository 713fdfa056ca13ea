"""Closed-form scorers over small all-numerical domains (theory scenarios)."""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..tabular import Schema, numerical_schema
from .base import Scorer

FAMILIES = ("linear", "rbf_mixture", "polygon_vertices")


class UnknownFamilyError(ValueError):
    pass


def polygon_vertices(k: int, radius: float = 1.0) -> np.ndarray:
    """Regular k-gon of the given circumradius centred at the origin (k=2: two antipodal points)."""
    angles = 2 * np.pi * np.arange(k) / k
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


class SyntheticModel(Scorer):
    def __init__(self, family: str, params: dict, schema: Schema):
        if family not in FAMILIES:
            raise UnknownFamilyError(f"unknown synthetic family {family!r}; expected one of {FAMILIES}")
        self.family = family
        self.params = params
        self.schema = schema
        self.has_gradient = family in ("linear", "rbf_mixture")
        if family == "linear":
            self.w = np.asarray(params["w"], dtype=float)
            self.b = float(params["b"])
        elif family == "rbf_mixture":
            self.centers = np.atleast_2d(np.asarray(params["centers"], dtype=float))
            self.widths = np.asarray(params["widths"], dtype=float)
            self.heights = np.asarray(params["heights"], dtype=float)
            self.bias = float(params.get("bias", 0.0))
        else:
            self.vertices = polygon_vertices(int(params["k"]), float(params.get("radius", 1.0)))
            self.snap = float(params.get("eps", 1e-9))

    def _rbf_terms(self, Z):
        diff = Z[:, None, :] - self.centers[None, :, :]
        sq = (diff ** 2).sum(axis=2)
        return diff, self.heights * np.exp(-sq / (2.0 * self.widths ** 2))

    def score(self, Z):
        """Pre-sigmoid score (linear / rbf families)."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if self.family == "linear":
            return Z @ self.w + self.b
        _, terms = self._rbf_terms(Z)
        return terms.sum(axis=1) + self.bias

    def proba(self, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if self.family == "polygon_vertices":
            d = np.abs(Z[:, None, :] - self.vertices[None, :, :]).max(axis=2)
            return (d.min(axis=1) == 0.0).astype(float)
        return expit(self.score(Z))

    def gradient_codes(self, z):
        if not self.has_gradient:
            return super().gradient_codes(z)
        z = np.asarray(z, dtype=float)[None, :]
        p = float(expit(self.score(z))[0])
        if self.family == "linear":
            ds = self.w
        else:
            diff, terms = self._rbf_terms(z)
            ds = -(terms[0][:, None] * diff[0] / (self.widths[:, None] ** 2)).sum(axis=0)
        return p * (1.0 - p) * ds

    def to_spec(self) -> dict:
        return {"family": self.family, **_jsonable(self.params),
                "bounds": [list(map(float, (f.bounds))) for f in self.schema]}


def _jsonable(params):
    return {k: (np.asarray(v).tolist() if isinstance(v, (list, tuple, np.ndarray)) else v)
            for k, v in params.items()}


def make_synthetic(spec: dict) -> SyntheticModel:
    """Build a scorer from ``{"family": ..., <params>, "bounds": [[lo, hi], ...]}``.

    ``linear``: w, b.  ``rbf_mixture``: centers, widths, heights, bias.
    ``polygon_vertices``: k, radius, eps (positive exactly at the vertices).
    """
    spec = dict(spec)
    family = spec.pop("family", None)
    if family not in FAMILIES:
        raise UnknownFamilyError(f"unknown synthetic family {family!r}; expected one of {FAMILIES}")
    if family == "linear":
        dim = len(spec["w"])
    elif family == "rbf_mixture":
        dim = np.atleast_2d(spec["centers"]).shape[1]
    else:
        dim = 2
    bounds = spec.pop("bounds", None)
    if bounds is None:
        r = float(spec.get("radius", 1.0)) if family == "polygon_vertices" else 1.0
        bounds = [(-r, r)] * dim if family == "polygon_vertices" else [(0.0, 1.0)] * dim
    schema = numerical_schema([f"x{d}" for d in range(dim)], bounds)
    return SyntheticModel(family, spec, schema)
