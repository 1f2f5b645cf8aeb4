import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12))


@pytest.fixture(scope="session")
def small_world():
    """A small synthetic dataset, its folds and a briefly trained head for fold 0."""
    from fsboost.data import generate_synthetic, make_folds
    from fsboost.presets import SMALL, SMALL_EXAMPLES_PER_CLASS
    from fsboost.training import TrainConfig, train_head

    ds = generate_synthetic(SMALL, SMALL_EXAMPLES_PER_CLASS)
    folds = make_folds(range(SMALL.num_classes), 4)
    params, _ = train_head(ds, folds[0], TrainConfig(learning_rate=0.1, iterations=60, hidden=16), True)
    return ds, folds, params
