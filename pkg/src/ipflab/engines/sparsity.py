from __future__ import annotations

import numpy as np

from ..models.base import Scorer
from ..tabular import Instance


def sparsify_batch(z: np.ndarray, C: np.ndarray, model: Scorer, target_p: float, cost_model=None) -> np.ndarray:
    """Greedily revert changed features of each candidate back to ``z``.

    Features are tried in decreasing per-feature cost order (feature order when
    no cost model is given); a revert is kept only if the candidate stays valid.
    All candidates advance in lockstep so each round is one batched prediction.
    """
    C = np.array(C, dtype=float, copy=True)
    if C.size == 0:
        return C
    changed = C != z
    if cost_model is not None:
        fc = cost_model.feature_costs(z, C)
    else:
        fc = np.broadcast_to(-np.arange(C.shape[1], dtype=float), C.shape).copy()
    fc = np.where(changed, fc, -np.inf)
    order = np.argsort(-fc, axis=1, kind="stable")
    n_changed = changed.sum(axis=1)
    for j in range(int(n_changed.max(initial=0))):
        rows = np.flatnonzero(n_changed > j)
        feats = order[rows, j]
        trial = C[rows].copy()
        trial[np.arange(rows.size), feats] = z[feats]
        ok = model.proba(trial) >= target_p
        C[rows[ok]] = trial[ok]
    return C


def sparsify(input: Instance, candidate: Instance, model: Scorer, target_p: float = 0.5, cost_model=None) -> Instance:
    schema = model.schema
    z = schema.to_codes(input)
    out = sparsify_batch(z, schema.to_codes(candidate)[None, :], model, target_p, cost_model)[0]
    return schema.from_codes(out, candidate.index)
