import math

import numpy as np
import pytest

from conftest import random_codes
from ipflab.cost import CostModel
from ipflab.engines import (GridSpec, LookupEngine, OptimalCostEngine, RandomSearchEngine, SelectionStrategy)
from ipflab.engines.base import CfEngine, CfResult
from ipflab.ipf import (MEAN_OF_RATIOS, IpfConfig, ParityError, Trajectory, batch_run, dumps_records, parity_ratio,
                        read_jsonl, relative_cost, run_ipf, summarize, write_jsonl)
from ipflab.models import ForestHyper, SyntheticModel, train_forest
from ipflab.tabular import numerical_schema, uniform_stats
from ipflab.theory import STABLE, certify_stability, random_grid_world

UNIT2 = numerical_schema(["a", "b"], [(0.0, 1.0), (0.0, 1.0)])
CM = CostModel(UNIT2, uniform_stats(UNIT2))
LINEAR = SyntheticModel("linear", {"w": [6.0, 4.0], "b": -6.0}, UNIT2)
GRID = GridSpec(include_input=False, values={0: np.linspace(0, 1, 21), 1: np.linspace(0, 1, 21)})


def fake(input_id, steps, success, cost, groups=None):
    return Trajectory(np.zeros((steps + 1, 2)), np.zeros((steps, 2)), success, cost, input_id=input_id,
                      groups=groups or {})


@pytest.fixture(scope="module")
def forest_setup(mixed):
    data, cm = mixed
    model = train_forest(data, hyper=ForestHyper(n_trees=10, max_depth=6))
    neg = data.codes[(model.predict(data.codes) == 0) & (data.labels == 0)][:6]
    return data, cm, model, neg


def test_positive_input():
    eng = OptimalCostEngine(LINEAR, CM, grid=GRID)
    tr = run_ipf(np.array([0.9, 0.9]), LINEAR, eng, IpfConfig(0.5), CM)
    assert tr.steps == 0 and tr.total_cost == 0.0 and tr.success and len(tr.states) == 1


def test_one_shot():
    eng = OptimalCostEngine(LINEAR, CM, grid=GRID)
    z = np.array([0.2, 0.3])
    tr = run_ipf(z, LINEAR, eng, IpfConfig(1.0), CM)
    goal = eng.explain(z).codes[0]
    assert tr.steps == 1 and tr.success
    assert tr.total_cost == pytest.approx(float(CM.costs(z, goal)))


def test_cost_bound_every_run():
    rng = np.random.default_rng(0)
    checked = 0
    for i in range(6):
        world = random_grid_world(rng, "linear" if i % 2 == 0 else "forest")
        eng = world.optimal_cost()
        probes = world.negatives()[:5]
        certs = certify_stability(eng, probes, (0.1, 0.3, 0.5, 0.7, 0.9))
        for c in certs:
            if c.verdict != STABLE:
                continue
            bound = float(world.cost_model.costs(c.probe, eng.explain(c.probe).codes[0]))
            for u in (0.1, 0.5, 0.9):
                for s in range(10):
                    tr = run_ipf(c.probe, world.model, eng, IpfConfig(u), world.cost_model,
                                 np.random.default_rng(s))
                    assert tr.total_cost <= bound + 1e-9
                    checked += 1
    assert checked > 100


def test_failure_recorded():
    class Failing(CfEngine):
        name = "failing"

        def explain(self, z, rng=None):
            return CfResult.failure(self.name, UNIT2, "nothing found")

    class Raising(CfEngine):
        name = "raising"

        def explain(self, z, rng=None):
            raise RuntimeError("boom")

    z = np.array([[0.1, 0.1]])
    tr = run_ipf(z[0], LINEAR, Failing(LINEAR, CM), IpfConfig(0.5), CM)
    assert not tr.success and tr.steps == 0 and tr.failure == "nothing found"
    [tr] = batch_run(z, LINEAR, Raising(LINEAR, CM), [IpfConfig(0.5)], CM)
    assert not tr.success and "boom" in tr.failure


def test_config_validation():
    with pytest.raises(ValueError):
        IpfConfig(0.5, T=0)
    with pytest.raises(ValueError):
        IpfConfig(1.5)
    a, b = IpfConfig(0.5), IpfConfig(0.5, strategy=SelectionStrategy("uniform"))
    assert a.strategy_name == "single" and b.strategy_name == "uniform"
    assert a.key("random/1") != b.key("random/1") and a.key("random/1") == IpfConfig(0.5).key("random/1")


def test_batch_count_and_determinism(forest_setup):
    data, cm, model, neg = forest_setup
    eng = RandomSearchEngine(model, cm, k=5)
    configs = [IpfConfig(u, strategy=SelectionStrategy("weighted")) for u in (0.3, 0.5, 1.0)]
    runs = batch_run(neg[:2], model, eng, configs, cm, 7, [10, 11])
    assert len(runs) == 6
    again = batch_run(neg[:2], model, eng, configs, cm, 7, [10, 11])
    assert dumps_records(runs, data.schema) == dumps_records(again, data.schema)
    flipped = batch_run(neg[:2][::-1], model, eng, configs, cm, 7, [11, 10])
    by_id = {(t.input_id, t.config.u): dumps_records([t]) for t in flipped}
    assert all(dumps_records([t]) == by_id[(t.input_id, t.config.u)] for t in runs)
    other = batch_run(neg[:2], model, eng, configs, cm, 8, [10, 11])
    assert dumps_records(runs) != dumps_records(other)


def test_batch_workers_match_serial(forest_setup):
    data, cm, model, neg = forest_setup
    eng = RandomSearchEngine(model, cm)
    configs = [IpfConfig(0.5), IpfConfig(1.0)]
    serial = batch_run(neg[:3], model, eng, configs, cm, 1)
    par = batch_run(neg[:3], model, eng, configs, cm, 1, workers=2)
    assert dumps_records(serial) == dumps_records(par)


def test_loop_fidelity(forest_setup, tmp_path):
    data, cm, model, neg = forest_setup
    pos = data.codes[(model.predict(data.codes) == 1) & (data.labels == 1)]
    engines = [RandomSearchEngine(model, cm, k=3), LookupEngine(model, cm, pos),
               OptimalCostEngine(model, cm, grid=GridSpec(n_quantiles=6))]
    for eng in engines:
        for tr in batch_run(neg, model, eng, [IpfConfig(u, T=5, strategy=SelectionStrategy("uniform"))
                                              for u in (0.1, 0.5)], cm):
            assert tr.steps <= 5 and len(tr.states) == tr.steps + 1
            assert np.all(model.proba(tr.states[:-1]) < 0.5)
            assert tr.success == (model.proba_one(tr.states[-1]) >= 0.5)
            brute = sum(float(cm.costs(a, b)) for a, b in zip(tr.states[:-1], tr.states[1:]))
            assert tr.total_cost == pytest.approx(brute, abs=1e-12)
            assert np.all(tr.states[:, ~data.schema.actionable_mask] == tr.states[0, ~data.schema.actionable_mask])
    runs = batch_run(neg, model, engines[0], [IpfConfig(0.5)], cm)
    for tr, z in zip(runs, neg):
        assert np.array_equal(tr.states[0], z)
    write_jsonl(tmp_path / "t.jsonl", runs, data.schema)
    recs = read_jsonl(tmp_path / "t.jsonl")
    assert [r["steps"] for r in recs] == [t.steps for t in runs]
    assert {"input_id", "config_id", "u", "engine", "strategy", "steps", "success", "total_cost", "groups",
            "deltas"} <= set(recs[0])


def test_stable_engine_relative_cost_one(forest_setup):
    data, cm, model, neg = forest_setup
    pos = data.codes[(model.predict(data.codes) == 1) & (data.labels == 1)]
    eng = LookupEngine(model, cm, pos)
    a = batch_run(neg, model, eng, [IpfConfig(1.0)], cm)
    b = batch_run(neg, model, eng, [IpfConfig(1.0)], cm)
    rep = summarize(a, b)
    assert rep.relative_cost == 1.0 and rep.success_rate == 1.0
    assert summarize(a, b).as_dict() == rep.as_dict()


def test_summarize_examples():
    base = [fake(0, 1, True, 2.0), fake(1, 1, True, 4.0), fake(2, 1, True, 1.0)]
    rep = summarize(base, base)
    assert rep.relative_cost == 1.0 and rep.mean_steps == 1.0
    runs = [fake(0, 3, True, 3.0), fake(1, 5, True, 4.0), fake(2, 30, False, 9.0)]
    rep = summarize(runs, base)
    assert rep.success_rate == pytest.approx(2 / 3)
    assert rep.mean_steps == 4.0 and rep.n_common == 2
    assert rep.relative_cost == pytest.approx((3 + 4) / (2 + 4))
    assert summarize([fake(0, 1, True, 1.0), fake(1, 30, False, 1.0)], base).success_rate == 0.5
    empty = summarize([fake(0, 30, False, 1.0)], base)
    assert empty.empty and math.isnan(empty.relative_cost)
    with pytest.raises(ValueError, match="baseline"):
        summarize([fake(9, 1, True, 1.0)], base)


def test_relative_cost_modes():
    a, b = np.array([2.0, 6.0]), np.array([1.0, 2.0])
    assert relative_cost(a, b)[0] == pytest.approx(8 / 3)
    assert relative_cost(a, b, MEAN_OF_RATIOS)[0] == pytest.approx(2.5)
    rng = np.random.default_rng(0)
    b = rng.uniform(1, 2, 400)
    a = 1.5 * b + rng.normal(0, 0.1, 400)
    r, se = relative_cost(a, b)
    # delta-method se against a bootstrap oracle
    boot = [relative_cost(a[i], b[i])[0] for i in rng.integers(0, 400, (2000, 400))]
    assert se == pytest.approx(np.std(boot), rel=0.15)
    with pytest.raises(ValueError):
        relative_cost(a, b, "median")


def test_parity_examples():
    g = lambda v: {"gender": v}
    runs = [fake(0, 3, True, 1.0, g("f")), fake(1, 3, True, 1.0, g("f")),
            fake(2, 2, True, 1.0, g("m")), fake(3, 2, True, 1.0, g("m"))]
    assert parity_ratio(runs, "gender", "f", "steps") == 1.5
    same = [fake(0, 2, True, 2.0, g("f")), fake(1, 2, True, 2.0, g("m"))]
    base = [fake(0, 1, True, 1.0, g("f")), fake(1, 1, True, 1.0, g("m"))]
    assert parity_ratio(same, "gender", "f", "relative_cost", base, advantaged="m") == 1.0
    assert parity_ratio(same, "gender", "f", "steps") == 1.0
    with pytest.raises(ParityError):
        parity_ratio(runs[:2], "gender", "f", "steps", advantaged="m")
    with pytest.raises(ParityError):
        parity_ratio(runs + [fake(4, 0, True, 0.0, g("x"))], "gender", "f", "steps")
    zero = [fake(0, 2, True, 1.0, g("f")), fake(1, 0, True, 0.0, g("m"))]
    with pytest.raises(ParityError, match="zero"):
        parity_ratio(zero, "gender", "f", "steps")
    with pytest.raises(ValueError):
        parity_ratio(same, "gender", "f", "relative_cost")


def test_group_reports_use_own_baseline():
    g = lambda v: {"gender": v}
    runs = [fake(0, 2, True, 4.0, g("f")), fake(1, 2, True, 3.0, g("m"))]
    base = [fake(0, 1, True, 2.0, g("f")), fake(1, 1, True, 1.0, g("m"))]
    rep = summarize(runs, base, group_names=("gender",))
    assert rep.groups["gender"]["f"].relative_cost == 2.0 and rep.groups["gender"]["m"].relative_cost == 3.0
    assert parity_ratio(runs, "gender", "f", "relative_cost", base) == pytest.approx(2 / 3)
