import itertools

import numpy as np
import pytest

from conftest import random_codes
from ipflab.cost import CostModel
from ipflab.engines import (CfRequest, GaParams, GeneticEngine, GeneticParams, GradientEngine, GridExplosionError,
                            GridSpec, InverseDistanceEngine, LookupEngine, LookupIndex, NoValidCandidateError,
                            OptimalCostEngine, PrototypeEngine, PrototypeIndex, RandomSearchEngine,
                            RandomSearchParams, SelectionStrategy, genetic_cf, gradient_ascent_cf, lookup_cf,
                            optimal_cost_cf, random_search_cf, select, select_index, sparsify, sparsify_batch)
from ipflab.engines.base import CfResult
from ipflab.models import ForestHyper, NotDifferentiableError, SyntheticModel, train_forest
from ipflab.models.base import Scorer
from ipflab.tabular import Instance, numerical_schema, uniform_stats
from ipflab.theory import OscillationFixture


class FirstCoord(Scorer):
    """m(x) = clip(x_0, 0, 1)."""

    def __init__(self, schema):
        self.schema = schema

    def proba(self, Z):
        return np.clip(np.atleast_2d(Z)[:, 0], 0.0, 1.0)


class Const(Scorer):
    def __init__(self, schema, p):
        self.schema, self.p = schema, p
        self.has_gradient = True

    def proba(self, Z):
        return np.full(np.atleast_2d(Z).shape[0], self.p)

    def gradient_codes(self, z):
        return np.zeros(len(z))


UNIT2 = numerical_schema(["a", "b"], [(0.0, 1.0), (0.0, 1.0)])
UNIT2_CM = CostModel(UNIT2, uniform_stats(UNIT2))
LINEAR = SyntheticModel("linear", {"w": [8.0, 4.0], "b": -7.0}, UNIT2)


@pytest.fixture(scope="module")
def forest(mixed):
    data, cm = mixed
    model = train_forest(data, hyper=ForestHyper(n_trees=10, max_depth=6))
    pos = data.codes[(model.predict(data.codes) == 1) & (data.labels == 1)]
    return data, cm, model, pos


def all_engines(data, cm, model, pos):
    return [
        OptimalCostEngine(model, cm, grid=GridSpec(n_quantiles=6)),
        LookupEngine(model, cm, pos),
        RandomSearchEngine(model, cm, k=3),
        GeneticEngine(model, cm, k=3),
        PrototypeEngine(model, cm, pos, k=3),
    ]


# --------------------------------------------------------------------------- optimal cost


def test_optimal_cost_1d_example():
    schema = numerical_schema(["x"], [(0.0, 1.0)])
    cm = CostModel(schema, uniform_stats(schema))
    req = CfRequest(np.array([0.2]), FirstCoord(schema))
    res = optimal_cost_cf(req, cm, GridSpec(values={0: np.linspace(0, 1, 11)}))
    assert res.codes[0, 0] == pytest.approx(0.5) and res.extras["cost"] == pytest.approx(0.3)
    valid = optimal_cost_cf(CfRequest(np.array([0.7]), FirstCoord(schema)), cm)
    assert valid.codes[0, 0] == 0.7 and valid.extras["cost"] == 0.0


def test_optimal_cost_matches_full_scan(forest):
    data, cm, model, _ = forest
    grid = GridSpec(n_quantiles=5, include_input=False)
    rng = np.random.default_rng(0)
    Z = random_codes(data.schema, 60, rng)
    Z = Z[model.predict(Z) == 0][:15]
    for z in Z:
        req = CfRequest(z, model)
        res = optimal_cost_cf(req, cm, grid)
        # independent scan over the same axes
        axes = []
        for d, f in enumerate(data.schema):
            if not f.actionable:
                axes.append([z[d]])
            elif f.is_categorical:
                axes.append(range(len(f.categories)))
            else:
                F = cm.stats[d].cdf
                axes.append(np.unique([F.knots[min(np.searchsorted(F.fractions, q), F.knots.size - 1)]
                                       for q in np.linspace(0, 1, 5)]))
        P = np.array(list(itertools.product(*axes)), dtype=float)
        P = P[model.proba(P) >= 0.5]
        c = cm.costs(z, P)
        assert res.extras["cost"] == pytest.approx(c.min(), abs=1e-12)
        assert cm.costs(z, res.codes[0]) <= c.min() + 1e-9
        tied = P[c <= c.min() + 1e-9]
        assert np.array_equal(res.codes[0], tied[np.lexsort(tied.T[::-1])[0]])


def test_optimal_cost_failure_and_guard():
    schema = numerical_schema(["x"], [(0.0, 1.0)])
    cm = CostModel(schema, uniform_stats(schema))
    res = optimal_cost_cf(CfRequest(np.array([0.2]), Const(schema, 0.1)), cm)
    assert res.failed and len(res) == 0
    big = numerical_schema([f"x{i}" for i in range(6)], [(0.0, 1.0)] * 6)
    with pytest.raises(GridExplosionError) as e:
        optimal_cost_cf(CfRequest(np.zeros(6), Const(big, 0.9)), CostModel(big, uniform_stats(big)),
                        GridSpec(include_input=False, values={d: np.linspace(0, 1, 30) for d in range(6)}))
    assert e.value.size == 30 ** 6


# --------------------------------------------------------------------------- lookup


def test_lookup_examples():
    S = np.array([[0.1, 0.1], [0.9, 0.9]])
    x = np.array([0.0, 0.0])
    assert UNIT2_CM.costs(x, S[0]) == pytest.approx(0.2) and UNIT2_CM.costs(x, S[1]) == pytest.approx(1.8)
    res = lookup_cf(CfRequest(x, LINEAR), S, UNIT2_CM)
    assert res.codes[0].tolist() == [0.1, 0.1] and res.extras["candidate_index"] == 0
    res = lookup_cf(CfRequest(S[1], LINEAR), S, UNIT2_CM)
    assert res.extras["candidate_index"] == 1 and UNIT2_CM.costs(S[1], res.codes[0]) == 0
    with pytest.raises(ValueError):
        lookup_cf(CfRequest(x, LINEAR), np.zeros((0, 2)), UNIT2_CM)
    tie = lookup_cf(CfRequest(np.array([0.5, 0.5]), LINEAR), np.array([[0.6, 0.5], [0.4, 0.5]]), UNIT2_CM)
    assert tie.extras["candidate_index"] == 0


def test_lookup_index_matches_scan(forest):
    data, cm, model, pos = forest
    idx = LookupIndex(pos, cm)
    rng = np.random.default_rng(1)
    for z in random_codes(data.schema, 500, rng):
        c = cm.costs(z, pos)
        i = idx.query(z)
        assert c[i] == pytest.approx(c.min(), abs=1e-12)
        assert i == int(np.flatnonzero(c <= c.min() + 1e-9)[0])


def test_lookup_respects_immutables(forest):
    data, cm, model, pos = forest
    eng = LookupEngine(model, cm, pos)
    rng = np.random.default_rng(2)
    for z in random_codes(data.schema, 100, rng):
        res = eng.explain(z)
        if not res.failed:
            assert res.codes[0, 3] == z[3]


# --------------------------------------------------------------------------- gradient


def test_gradient_linear():
    z = np.array([0.5, 0.7])  # score 4 + 2.8 - 7 = -0.2
    res = gradient_ascent_cf(CfRequest(z, LINEAR), UNIT2_CM, GaParams(), np.array([1.0, 1.0]))
    e = res.codes[0]
    assert not res.degenerate and res.validity[0]
    assert np.all(e >= z) and e[0] > z[0]
    assert LINEAR.proba_one(e) >= 0.5


def test_gradient_fallback_and_errors():
    d = np.array([0.9, 0.9])
    res = gradient_ascent_cf(CfRequest(np.array([0.1, 0.1]), Const(UNIT2, 0.0)), UNIT2_CM, None, d)
    assert res.degenerate and res.codes[0].tolist() == d.tolist()
    with pytest.raises(NotDifferentiableError):
        forest_like = FirstCoord(UNIT2)
        gradient_ascent_cf(CfRequest(np.zeros(2), forest_like), UNIT2_CM, None, d)


def test_gradient_fixture_endpoints():
    fx = OscillationFixture.load()
    model, cm, eng = fx.build()
    e1 = eng.explain(np.array(fx.x1)).codes[0]
    e2 = eng.explain(np.array(fx.x2)).codes[0]
    assert np.linalg.norm(e1 - e2) > 1.0
    assert np.allclose(e1, -e2, atol=1e-6)
    assert model.proba_one(e1) >= 0.5 and model.proba_one(e2) >= 0.5
    # each endpoint sits in the basin of a different maximum of m
    peaks = []
    for e in (e1, e2):
        y = e.copy()
        for _ in range(3000):
            q = model.proba_one(y)
            y = np.clip(y + 0.01 * model.gradient_codes(y) / (q * (1 - q)), -4, 4)
        peaks.append(y)
        assert np.linalg.norm(y - e) < 0.5
    assert np.linalg.norm(peaks[0] - peaks[1]) > 1.0


# --------------------------------------------------------------------------- random and genetic search


def test_random_search_always_positive():
    req = CfRequest(np.array([0.3, 0.3]), Const(UNIT2, 0.9), k=3)
    res = random_search_cf(req, UNIT2_CM, None, np.random.default_rng(0))
    costs = UNIT2_CM.costs(req.codes, res.codes)
    assert costs[0] == 0.0 and np.array_equal(res.codes[0], req.codes)
    assert np.all(costs[0] <= costs)


def test_random_search_always_negative():
    req = CfRequest(np.array([0.3, 0.3]), Const(UNIT2, 0.1))
    res = random_search_cf(req, UNIT2_CM, RandomSearchParams(n_samples=50), np.random.default_rng(0))
    assert res.failed and res.extras["rounds"] == 5
    with pytest.raises(ValueError):
        random_search_cf(req, UNIT2_CM, RandomSearchParams(n_samples=0), np.random.default_rng(0))


def test_random_search_pool_oracle(forest):
    data, cm, model, _ = forest
    rng = np.random.default_rng(3)
    Z = random_codes(data.schema, 40, rng)
    for i, z in enumerate(Z[model.predict(Z) == 0][:15]):
        req = CfRequest(z, model, k=1)
        res = random_search_cf(req, cm, RandomSearchParams(record_pool=True), np.random.default_rng(i))
        if res.failed:
            continue
        pool = res.extras["pool"]
        valid = pool[model.proba(pool) >= 0.5]
        assert cm.costs(z, res.codes[0]) <= cm.costs(z, valid).min() + 1e-12
        assert res.validity.all()


def test_genetic_examples():
    z = np.array([0.3, 0.3])
    req = CfRequest(z, Const(UNIT2, 0.9))
    res = genetic_cf(req, UNIT2_CM, None, np.random.default_rng(0))
    assert np.array_equal(res.codes[0], z)
    req = CfRequest(np.array([0.2, 0.2]), LINEAR)
    res = genetic_cf(req, UNIT2_CM, GeneticParams(generations=30), np.random.default_rng(1))
    h = res.extras["history"]
    assert len(h) == 31 and all(b <= a for a, b in zip(h, h[1:]))
    with pytest.raises(ValueError):
        genetic_cf(req, UNIT2_CM, GeneticParams(population=3), np.random.default_rng(0))
    fail = genetic_cf(CfRequest(z, Const(UNIT2, 0.0)), UNIT2_CM, None, np.random.default_rng(0))
    assert fail.failed


def test_genetic_near_optimal_cost():
    oc = OptimalCostEngine(LINEAR, UNIT2_CM)
    ge = GeneticEngine(LINEAR, UNIT2_CM)
    X = np.random.default_rng(0).uniform(0, 1, (400, 2))
    X = X[LINEAR.proba(X) < 0.5][:20]
    assert len(X) == 20
    for i, x in enumerate(X):
        best = UNIT2_CM.costs(x, oc.explain(x).codes[0])
        got = UNIT2_CM.costs(x, ge.explain(x, np.random.default_rng(i)).codes[0])
        assert got <= 1.5 * best


# --------------------------------------------------------------------------- prototype


def test_prototype(forest):
    data, cm, model, pos = forest
    eng = PrototypeEngine(model, cm, pos)
    assert np.array_equal(eng.explain(pos[0]).codes[0], pos[0])
    idx = PrototypeIndex(pos, data.schema)
    rng = np.random.default_rng(4)
    Zq = random_codes(data.schema, 500, rng)
    for z in Zq:
        e = idx.encoder.encode_codes(z)
        d = np.linalg.norm(idx.points - e, axis=1)
        near = idx.nearest(z, 1)[0]
        assert d[near] == pytest.approx(d.min(), abs=1e-12)
        assert near == int(np.flatnonzero(d <= d.min() + 1e-12)[0])
    for z in Zq[model.predict(Zq) == 0][:50]:
        res = eng.explain(z)
        if not res.failed:
            assert res.validity.all()
    with pytest.raises(ValueError):
        PrototypeIndex(np.zeros((0, 4)), data.schema)


# --------------------------------------------------------------------------- sparsify and select


def test_sparsify_examples():
    m = SyntheticModel("linear", {"w": [8.0, 0.0], "b": -4.0}, UNIT2)
    x, c = Instance((0.2, 0.2)), Instance((0.9, 0.8))
    assert sparsify(x, c, m).values == (0.9, 0.2)
    assert sparsify(x, x, m).values == x.values


def test_sparsify_random_pairs(forest):
    data, cm, model, _ = forest
    rng = np.random.default_rng(5)
    Z = random_codes(data.schema, 20000, rng)
    p = model.proba(Z)
    neg, pos = Z[p < 0.5][:1000], Z[p >= 0.5][:1000]
    assert len(neg) == len(pos) == 1000
    out = sparsify_batch(neg[0], pos, model, 0.5, cm)
    assert np.all(model.proba(out) >= 0.5)
    assert np.all(cm.costs(neg[0], out) <= cm.costs(neg[0], pos) + 1e-12)
    assert np.all(cm.feature_costs(neg[0], out) <= cm.feature_costs(neg[0], pos) + 1e-12)
    for z, c in zip(neg[:200], pos[:200]):
        s = sparsify_batch(z, c[None], model, 0.5, cm)[0]
        assert model.proba_one(s) >= 0.5 and cm.costs(z, s) <= cm.costs(z, c) + 1e-12


def _result(C, valid=None):
    C = np.asarray(C, dtype=float)
    return CfResult(C, "t", np.ones(len(C), dtype=bool) if valid is None else np.asarray(valid), UNIT2)


def test_select_examples():
    z = np.zeros(2)
    one = _result([[0.4, 0.1]])
    rng = np.random.default_rng(0)
    for kind in ("closest", "weighted", "uniform"):
        assert select_index(z, one, SelectionStrategy(kind), UNIT2_CM, rng) == 0
    # costs 0 and ln 3 under the uniform CDF on [0, 1]^2
    two = _result([[0.0, 0.0], [1.0, np.log(3.0) - 1.0]])
    picks = np.array([select_index(z, two, SelectionStrategy("weighted"), UNIT2_CM, rng) for _ in range(100000)])
    assert abs((picks == 0).mean() - 0.75) <= 0.01
    four = _result(np.full((4, 2), 0.5))
    picks = np.array([select_index(z, four, SelectionStrategy("uniform"), UNIT2_CM, rng) for _ in range(10000)])
    assert np.all(np.abs(np.bincount(picks, minlength=4) / 10000 - 0.25) <= 0.02)
    assert select_index(z, _result([[0.5, 0.5], [0.1, 0.0], [0.1, 0.0]]), SelectionStrategy(), UNIT2_CM, None) == 1
    assert select(Instance((0.0, 0.0)), two, SelectionStrategy(), UNIT2_CM).values == (0.0, 0.0)
    with pytest.raises(NoValidCandidateError):
        select_index(z, _result([[0.5, 0.5]], [False]), SelectionStrategy(), UNIT2_CM, rng)
    with pytest.raises(ValueError):
        SelectionStrategy("nearest")


# --------------------------------------------------------------------------- invariants


def test_actionability_and_validity(forest):
    data, cm, model, pos = forest
    rng = np.random.default_rng(6)
    Z = random_codes(data.schema, 200, rng)
    Z = Z[model.predict(Z) == 0][:25]
    fixed = ~data.schema.actionable_mask
    for eng in all_engines(data, cm, model, pos):
        for i, z in enumerate(Z):
            res = eng.explain(z, np.random.default_rng(i))
            if res.failed:
                continue
            assert np.all(res.codes[:, fixed] == z[fixed]), eng.name
            if not res.degenerate:
                assert np.all(model.proba(res.codes) >= eng.target_p), eng.name
            data.schema.validate_codes(res.codes)


def test_gradient_actionability():
    schema = numerical_schema(["a", "b"], [(0.0, 1.0), (0.0, 1.0)], [True, False])
    m = SyntheticModel("linear", {"w": [8.0, 4.0], "b": -7.0}, schema)
    eng = GradientEngine(m, CostModel(schema, uniform_stats(schema)), np.array([1.0, 1.0]))
    z = np.array([0.6, 0.4])
    res = eng.explain(z)
    assert res.codes[0, 1] == 0.4 and not res.degenerate


def test_determinism(forest):
    data, cm, model, pos = forest
    rng = np.random.default_rng(7)
    Z = random_codes(data.schema, 100, rng)
    Z = Z[model.predict(Z) == 0][:10]
    engines = all_engines(data, cm, model, pos)
    for eng in engines:
        for z in Z:
            if eng.deterministic:
                a, b = eng.explain(z, np.random.default_rng(1)), eng.explain(z, np.random.default_rng(2))
            else:
                a, b = eng.explain(z, np.random.default_rng(1)), eng.explain(z, np.random.default_rng(1))
            assert np.array_equal(a.codes, b.codes), eng.name


def test_target_p_bounds():
    with pytest.raises(ValueError):
        CfRequest(np.zeros(2), LINEAR, target_p=1.0)
    with pytest.raises(ValueError):
        CfRequest(np.zeros(2), LINEAR, k=0)


def test_inverse_distance_engine():
    V = np.array([[1.0, 0.0], [-1.0, 0.0]])
    m = SyntheticModel("polygon_vertices", {"k": 2}, numerical_schema(["a", "b"], [(-1, 1), (-1, 1)]))
    eng = InverseDistanceEngine(m, CostModel(m.schema, uniform_stats(m.schema)), V)
    rng = np.random.default_rng(0)
    picks = [eng.explain(np.array([0.5, 0.0]), rng).extras["candidate_index"] for _ in range(4000)]
    # 1/d weights 2 and 2/3 -> probability 3/4 for the near vertex
    assert abs(np.mean(np.array(picks) == 0) - 0.75) < 0.03
    assert eng.explain(np.array([-1.0, 0.0]), rng).extras["candidate_index"] == 1
