import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ipflab.cost import CostModel
from ipflab.tabular import (CATEGORICAL, NUMERICAL, Dataset, FeatureSchema, Schema, fit_stats,
                            load_bundled, split)

settings.register_profile("ipflab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ipflab")


def mixed_schema():
    """Two numerical, two categorical features; ``race`` immutable."""
    return Schema([
        FeatureSchema("age", NUMERICAL, (), (18.0, 80.0), True),
        FeatureSchema("job", CATEGORICAL, ("a", "b", "c"), None, True),
        FeatureSchema("hours", NUMERICAL, (), (0.0, 100.0), True),
        FeatureSchema("race", CATEGORICAL, ("x", "y"), None, False),
    ])


def random_codes(schema, n, rng):
    Z = np.empty((n, len(schema)))
    for d, f in enumerate(schema):
        if f.is_categorical:
            Z[:, d] = rng.integers(0, len(f.categories), n)
        else:
            lo, hi = f.bounds
            Z[:, d] = rng.uniform(lo, hi, n)
    return Z


@pytest.fixture(scope="session")
def mixed():
    """A mixed random dataset with its cost model."""
    schema = mixed_schema()
    rng = np.random.default_rng(7)
    Z = random_codes(schema, 300, rng)
    Z[:, 0] = np.round(Z[:, 0])
    labels = ((Z[:, 2] > 50) ^ (Z[:, 1] == 2)).astype(int)
    data = Dataset(schema, Z, labels)
    return data, CostModel(schema, fit_stats(data))


@pytest.fixture(scope="session")
def german():
    return load_bundled("german")


@pytest.fixture(scope="session")
def adult():
    return load_bundled("adult")


@pytest.fixture(scope="session")
def german_split(german):
    train, test = split(german, 0.2, 0)
    return train, test, CostModel(german.schema, fit_stats(train))
