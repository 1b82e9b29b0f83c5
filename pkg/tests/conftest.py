import numpy as np
import pytest

from crashml.dataset import LRAP_SCHEMA, Dataset, generate_synthetic, planted_plan


def random_dataset(n, fatal, seed=0, schema=LRAP_SCHEMA):
    """Uniform random codes with exactly ``fatal`` fatal rows."""
    rng = np.random.default_rng(seed)
    codes = np.stack([rng.integers(0, s, size=n) for s in schema.sizes], axis=1)
    labels = np.zeros(n, dtype=np.int8)
    labels[rng.choice(n, size=fatal, replace=False)] = 1
    return Dataset(schema, codes, labels)


@pytest.fixture(scope="session")
def planted_small():
    return generate_synthetic(1200, 0.05, planted_plan(), seed=3)


@pytest.fixture(scope="session")
def ratio_95_5():
    return random_dataset(1000, 50, seed=11)
