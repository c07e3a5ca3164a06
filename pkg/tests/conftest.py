import os
import sys

import numpy as np
import pytest

APP_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "app")
if APP_DIR not in sys.path:
    sys.path.insert(0, APP_DIR)

from survey_data import EmpiricalDist, GroupedSample  # noqa: E402

REPO_DIR = os.path.abspath(os.path.join(APP_DIR, ".."))
TOY_CSV = os.path.join(REPO_DIR, "data", "toy_two_groups.csv")
LEGACY_DIR = os.path.join(REPO_DIR, "data", "legacy")
EXPERIMENT_YAML = os.path.join(REPO_DIR, "config", "experiment.yaml")


@pytest.fixture
def five():
    return EmpiricalDist.from_values([1, 2, 3, 4, 5])


@pytest.fixture
def toy_sample():
    # groups {1, 4} and {2, 3, 5}
    return GroupedSample.from_arrays([1.0, 2.0, 3.0, 4.0, 5.0], [1, 2, 2, 1, 2])


def random_grouped(rng, n, K, sigma=0.8):
    """Lognormal incomes with stratum-specific log-means; every stratum nonempty."""
    group_of = np.concatenate([np.arange(1, K + 1), rng.integers(1, K + 1, size=n - K)])
    rng.shuffle(group_of)
    incomes = rng.lognormal(mean=0.25 * group_of, sigma=sigma)
    return GroupedSample.from_arrays(incomes, group_of)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
