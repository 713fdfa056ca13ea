import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import mixed_schema
from ipflab.fulfillment import EffortLevel, effort_progress, fulfill_codes, partial_fulfill, support, support_codes
from ipflab.tabular import Instance, SchemaError, numerical_schema

NUM = numerical_schema(["a", "b"], [(0.0, 100.0), (0.0, 100.0)])


def test_interpolation_and_snap():
    rng = np.random.default_rng(0)
    out = partial_fulfill(Instance((10.0, 0.0)), Instance((20.0, 0.0)), 0.3, 0.0, rng, NUM)
    assert out.state.values[0] == pytest.approx(13.0) and out.flipped == frozenset()
    out = partial_fulfill(Instance((19.8, 0.0)), Instance((20.0, 0.0)), 0.3, 0.5, rng, NUM)
    assert out.state.values[0] == 20.0


def test_endpoints():
    schema = mixed_schema()
    x, g = Instance((30.0, "a", 10.0, "x")), Instance((50.0, "c", 70.0, "y"))
    for seed in range(20):
        rng = np.random.default_rng(seed)
        assert partial_fulfill(x, g, 1.0, 0.0, rng, schema).state.values == g.values
        out = partial_fulfill(x, g, 0.0, 0.0, rng, schema)
        assert out.state.values == x.values and not out.flipped


def test_errors():
    schema = mixed_schema()
    x = Instance((30.0, "a", 10.0, "x"))
    with pytest.raises(SchemaError):
        partial_fulfill(x, Instance((1.0,)), 0.5, 0.0, np.random.default_rng(0), schema)
    with pytest.raises(ValueError):
        partial_fulfill(x, x, 1.5, 0.0, np.random.default_rng(0), schema)
    with pytest.raises(ValueError):
        EffortLevel(-0.1)
    with pytest.raises(ValueError):
        partial_fulfill(x, x, 0.5, -1.0, np.random.default_rng(0), schema)


def test_flip_frequency():
    cat = np.array([True, True])
    z, g = np.array([0.0, 1.0]), np.array([2.0, 0.0])
    rng = np.random.default_rng(11)
    W = np.array([fulfill_codes(z, g, 0.3, 0.0, cat, rng) for _ in range(10000)])
    freq = (W == g).mean(axis=0)
    assert np.all(np.abs(freq - 0.3) <= 0.02)
    # the two draws are independent
    both = np.all(W == g, axis=1).mean()
    assert abs(both - 0.09) <= 0.02


def test_deterministic_given_stream():
    schema = mixed_schema()
    x, g = Instance((30.0, "a", 10.0, "x")), Instance((50.0, "c", 70.0, "y"))
    a = [partial_fulfill(x, g, 0.4, 0.0, np.random.default_rng(5), schema).state for _ in range(3)]
    assert a[0] == a[1] == a[2]


@given(st.lists(st.floats(-100, 100), min_size=4, max_size=4), st.lists(st.floats(-100, 100), min_size=4, max_size=4),
       st.floats(0, 1), st.integers(0, 2 ** 32 - 1))
def test_segment_property(z, g, u, seed):
    z, g = np.array(z), np.array(g)
    cat = np.array([False, True, False, True])
    z[cat], g[cat] = np.round(np.abs(z[cat])) % 3, np.round(np.abs(g[cat])) % 3
    w = fulfill_codes(z, g, u, 0.0, cat, np.random.default_rng(seed))
    num = ~cat
    lo, hi = np.minimum(z, g), np.maximum(z, g)
    assert np.all((w[num] >= lo[num] - 1e-9) & (w[num] <= hi[num] + 1e-9))
    assert np.all((w[cat] == z[cat]) | (w[cat] == g[cat]))
    # raw-value contraction toward the goal
    assert np.allclose(np.abs(w[num] - g[num]), (1 - u) * np.abs(z[num] - g[num]), atol=1e-9)
    assert any(np.array_equal(w, s) for s in support_codes(z, g, [u], 0.0, cat))


def test_snap_idempotent():
    z, g = np.array([3.0, 4.0]), np.array([7.0, 1.0])
    cat = np.zeros(2, dtype=bool)
    w = fulfill_codes(z, g, 1.0, 0.0, cat, None)
    assert np.array_equal(w, g) and np.array_equal(fulfill_codes(w, g, 1.0, 0.0, cat, None), g)


def test_support_examples():
    x, g = Instance((0.0, 0.0)), Instance((10.0, 50.0))
    assert support(x, g, [0.5], 0.0, NUM) == {Instance((5.0, 25.0))}
    assert support(x, g, [1.0], 0.0, NUM) == {g}
    schema = mixed_schema()
    xm, gm = Instance((30.0, "a", 10.0, "x")), Instance((50.0, "c", 70.0, "y"))
    pts = support(xm, gm, [0.5], 0.0, schema)
    assert len(pts) == 4
    assert {p.values[0] for p in pts} == {40.0}
    assert support(xm, gm, [1.0], 0.0, schema) == {gm}
    assert len(support(xm, gm, [0.1, 0.5, 0.9], 0.0, schema)) == 12
    with pytest.raises(ValueError):
        support(xm, gm, [], 0.0, schema)


def test_support_guard():
    cat = np.ones(21, dtype=bool)
    with pytest.raises(ValueError, match="explosion"):
        support_codes(np.zeros(21), np.ones(21), [0.5], 0.0, cat)


def test_effort_progress():
    assert round(effort_progress(0.1, 30), 3) == 0.958
    assert effort_progress(1.0, 1) == 1.0
    assert effort_progress(0.5, 2) == 0.75
    with pytest.raises(ValueError):
        effort_progress(0.5, -1)
