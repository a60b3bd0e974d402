import numpy as np
import pytest

import sourceattrib as sa


@pytest.fixture(scope="session")
def small_dataset():
    """A small 2-time, 2-location simulated dataset with its ground truth."""
    rng = np.random.default_rng(42)
    truth = sa.default_true_params(n_types=8, n_sources=3, rng=rng)
    totals = np.full((3, 2), 400, dtype=np.int64)
    data, prevalence, truth = sa.simulate(truth, totals, rng)
    data, _ = sa.preprocess(data)
    return data, prevalence, truth


@pytest.fixture(scope="session")
def small_chain(small_dataset):
    data, prevalence, _ = small_dataset
    model = sa.AttributionModel(data, prevalence)
    return model.fit(sa.FitParams(n_iter=50, burn_in=200, thin=5, seed=314))
