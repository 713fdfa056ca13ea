"""Random forest of CART trees (Gini, bootstrap, per-node feature subsampling).

Trees are grown level by level on histogram-binned encoded features: all nodes
of one depth are split together with a handful of ``bincount`` calls. Split
thresholds sit halfway between consecutive observed values, so binned
training and raw-value prediction agree exactly. Prediction walks the trees over code vectors in a
compiled kernel, computing one-hot/min-max columns on the fly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ..tabular import Dataset, Encoder, Schema
from .base import Scorer


@dataclass
class ForestHyper:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 2
    seed: int = 0
    max_bins: int = 255
    bootstrap: bool = True


@numba.njit(cache=True)
def _forest_proba(Z, feature, threshold, left, right, value, col_feature, col_category, col_lo, col_span):
    n = Z.shape[0]
    n_trees = feature.shape[0]
    out = np.zeros(n)
    for t in range(n_trees):
        f_t = feature[t]
        th_t = threshold[t]
        l_t = left[t]
        r_t = right[t]
        for i in range(n):
            node = 0
            while f_t[node] >= 0:
                j = f_t[node]
                v = Z[i, col_feature[j]]
                c = col_category[j]
                if c >= 0:
                    x = 1.0 if v == c else 0.0
                else:
                    x = (v - col_lo[j]) / col_span[j]
                if x <= th_t[node]:
                    node = l_t[node]
                else:
                    node = r_t[node]
            out[i] += value[t, node]
    return out / n_trees


class ForestModel(Scorer):
    has_gradient = False

    def __init__(self, schema: Schema, feature, threshold, left, right, value, hyper: ForestHyper | None = None):
        self.schema = schema
        self.encoder = Encoder(schema)
        self.feature = np.ascontiguousarray(feature, dtype=np.int64)
        self.threshold = np.ascontiguousarray(threshold, dtype=float)
        self.left = np.ascontiguousarray(left, dtype=np.int64)
        self.right = np.ascontiguousarray(right, dtype=np.int64)
        self.value = np.ascontiguousarray(value, dtype=float)
        self.hyper = hyper or ForestHyper(n_trees=self.feature.shape[0])

    @property
    def n_trees(self) -> int:
        return self.feature.shape[0]

    def proba(self, Z):
        Z = np.ascontiguousarray(np.atleast_2d(Z), dtype=float)
        e = self.encoder
        return _forest_proba(Z, self.feature, self.threshold, self.left, self.right, self.value,
                             e.col_feature, e.col_category, e.col_lo, e.col_span)

    def tree_proba(self, Z, t: int) -> np.ndarray:
        Z = np.ascontiguousarray(np.atleast_2d(Z), dtype=float)
        e = self.encoder
        sl = slice(t, t + 1)
        return _forest_proba(Z, self.feature[sl], self.threshold[sl], self.left[sl], self.right[sl],
                             self.value[sl], e.col_feature, e.col_category, e.col_lo, e.col_span)


def _bin_columns(X: np.ndarray, max_bins: int):
    """Bin each column at (at most ``max_bins``) observed values.

    A split "bin <= b" is stored as the midpoint between bin edge b and the
    next observed value, so no training value lies exactly on a split.
    """
    n, p = X.shape
    edges, mids = [], []
    Xb = np.empty((n, p), dtype=np.int64)
    for j in range(p):
        col = X[:, j]
        uniq = np.unique(col)
        t = uniq
        if t.size > max_bins:
            t = np.unique(np.quantile(col, np.linspace(0, 1, max_bins + 1)[1:], method="inverted_cdf"))
        Xb[:, j] = np.searchsorted(t, col, side="left")
        after = np.searchsorted(uniq, t, side="right")
        nxt = uniq[np.minimum(after, uniq.size - 1)]
        edges.append(t)
        mids.append(np.where(after < uniq.size, 0.5 * (t + nxt), t))
    width = max(t.size for t in edges) + 1
    T = np.full((p, width), np.inf)
    for j, m in enumerate(mids):
        T[j, :m.size] = m
    return Xb, T, width


def _grow_tree(Xb, T, width, y, w, k, hyper: ForestHyper, rng):
    n, p = Xb.shape
    min_leaf = hyper.min_leaf
    feature, threshold, left, right, value = [-1], [0.0], [0], [0], [0.0]
    node_of = np.zeros(n, dtype=np.int64)
    frontier = np.array([0])
    yw = y * w
    for depth in range(hyper.max_depth + 1):
        if frontier.size == 0:
            break
        local_of = np.full(len(feature), -1, dtype=np.int64)
        local_of[frontier] = np.arange(frontier.size)
        act = np.flatnonzero(local_of[node_of] >= 0)
        loc = local_of[node_of[act]]
        nf = frontier.size
        tot = np.bincount(loc, weights=w[act], minlength=nf)
        pos = np.bincount(loc, weights=yw[act], minlength=nf)
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(tot > 0, pos / tot, 0.0)
        for i, node in enumerate(frontier):
            value[node] = float(frac[i])
        if depth == hyper.max_depth:
            break
        splittable = (tot >= 2 * min_leaf) & (pos > 0) & (pos < tot)
        feats = np.argsort(rng.random((nf, p)), axis=1)[:, :k]
        best = np.full(nf, np.inf)
        best_f = np.zeros(nf, dtype=np.int64)
        best_b = np.zeros(nf, dtype=np.int64)
        wa, ya = w[act], yw[act]
        Xa = Xb[act]
        rows = np.arange(act.size)
        for s in range(k):
            fs = feats[loc, s]
            key = loc * width + Xa[rows, fs]
            Ht = np.bincount(key, weights=wa, minlength=nf * width).reshape(nf, width)
            Hp = np.bincount(key, weights=ya, minlength=nf * width).reshape(nf, width)
            CL = np.cumsum(Ht, axis=1)[:, :-1]
            CP = np.cumsum(Hp, axis=1)[:, :-1]
            R = tot[:, None] - CL
            RP = pos[:, None] - CP
            valid = (CL >= min_leaf) & (R >= min_leaf)
            with np.errstate(invalid="ignore", divide="ignore"):
                imp = 2 * CP * (CL - CP) / CL + 2 * RP * (R - RP) / R
            imp[~valid] = np.inf
            bb = np.argmin(imp, axis=1)
            sc = imp[np.arange(nf), bb]
            better = sc < best - 1e-12
            best = np.where(better, sc, best)
            best_f = np.where(better, feats[:, s], best_f)
            best_b = np.where(better, bb, best_b)
        do_split = splittable & np.isfinite(best)
        new_frontier = []
        child_of = np.full((nf, 2), -1, dtype=np.int64)
        for i in np.flatnonzero(do_split):
            node = frontier[i]
            f, b = int(best_f[i]), int(best_b[i])
            lc, rc = len(feature), len(feature) + 1
            feature[node] = f
            threshold[node] = float(T[f, b])
            left[node], right[node] = lc, rc
            for _ in range(2):
                feature.append(-1)
                threshold.append(0.0)
                value.append(0.0)
            left.extend([lc, rc])
            right.extend([lc, rc])
            child_of[i] = (lc, rc)
            new_frontier.extend([lc, rc])
        split_samples = do_split[loc]
        s_act = act[split_samples]
        s_loc = loc[split_samples]
        go_left = Xa[rows[split_samples], best_f[s_loc]] <= best_b[s_loc]
        node_of[s_act] = np.where(go_left, child_of[s_loc, 0], child_of[s_loc, 1])
        frontier = np.array(new_frontier, dtype=np.int64)
    return (np.array(feature), np.array(threshold), np.array(left), np.array(right), np.array(value))


def train_forest(train: Dataset, stats=None, hyper: ForestHyper | None = None) -> ForestModel:
    """Fit a soft-voting random forest on the encoded training set.

    Rows are sorted into a canonical order before bootstrap sampling, so the
    fitted forest does not depend on the input row order.
    """
    hyper = hyper or ForestHyper()
    if len(train) == 0:
        raise ValueError("empty training set")
    enc = Encoder(train.schema)
    X = enc.encode_codes(train.codes)
    y = train.labels.astype(float)
    order = np.lexsort(np.column_stack([X, y]).T[::-1])
    X, y = X[order], y[order]
    n, p = X.shape
    Xb, T, width = _bin_columns(X, hyper.max_bins)
    k = max(1, math.ceil(math.sqrt(p)))
    trees = []
    for t in range(hyper.n_trees):
        rng = np.random.default_rng([hyper.seed, t])
        if hyper.bootstrap:
            w = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
        else:
            w = np.ones(n)
        keep = np.flatnonzero(w > 0)
        trees.append(_grow_tree(Xb[keep], T, width, y[keep], w[keep], k, hyper, rng))
    size = max(tr[0].size for tr in trees)
    arrays = []
    for a, fill in zip(range(5), (-1, 0.0, 0, 0, 0.0)):
        M = np.full((len(trees), size), fill, dtype=float if a in (1, 4) else np.int64)
        for i, tr in enumerate(trees):
            M[i, :tr[a].size] = tr[a]
        arrays.append(M)
    return ForestModel(train.schema, *arrays, hyper=hyper)
