"""Prototype-guided CF: nearest positive training instance, then sparsified."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..tabular import Encoder
from .base import CfEngine, CfRequest, CfResult
from .sparsity import sparsify_batch


class PrototypeIndex:
    """KD-tree over encoded (one-hot / min-max) prototype rows."""

    def __init__(self, codes: np.ndarray, schema):
        self.codes = np.atleast_2d(np.asarray(codes, dtype=float))
        if self.codes.shape[0] == 0 or self.codes.size == 0:
            raise ValueError("empty prototype index")
        self.encoder = Encoder(schema)
        self.points = self.encoder.encode_codes(self.codes)
        self.tree = cKDTree(self.points)

    def __len__(self):
        return self.codes.shape[0]

    def nearest(self, z: np.ndarray, k: int) -> np.ndarray:
        """Indices of the ``k`` nearest rows (Euclidean in encoded space, ties by index)."""
        k = min(k, len(self))
        e = self.encoder.encode_codes(z[None, :])[0]
        dist, idx = self.tree.query(e, k=k)
        dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
        return idx[np.lexsort((idx, np.round(dist, 12)))]


def prototype_cf(req: CfRequest, index: PrototypeIndex, cost_model) -> CfResult:
    """Nearest prototypes, with immutable features reset to the input's values.

    Prototypes are taken in distance order until ``k`` of them stay valid after
    the reset; each is then sparsified toward the input. A valid input is its
    own prototype.
    """
    z = req.codes
    if req.model.proba_one(z) >= req.target_p:
        return CfResult.of(z, "prototype", req)
    fixed = ~req.actionable
    found = np.zeros((0, z.size))
    want = max(8 * req.k, 32)
    while True:
        near = index.nearest(z, want)
        C = index.codes[near].copy()
        C[:, fixed] = z[fixed]
        C = C[req.model.proba(C) >= req.target_p]
        found = C[:req.k]
        if found.shape[0] >= req.k or want >= len(index):
            break
        want *= 4
    if found.shape[0] == 0:
        return CfResult.failure("prototype", req.schema, "no prototype survives the immutable features")
    return CfResult.of(sparsify_batch(z, found, req.model, req.target_p, cost_model), "prototype", req)


class PrototypeEngine(CfEngine):
    name = "prototype"

    def __init__(self, model, cost_model, prototypes, target_p=0.5, k=1):
        super().__init__(model, cost_model, target_p, k)
        self.index = PrototypeIndex(prototypes, model.schema)

    def explain(self, z, rng=None):
        return prototype_cf(self.request(z), self.index, self.cost_model)
