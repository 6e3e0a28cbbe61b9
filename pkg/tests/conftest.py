import json

import numpy as np
import pytest

from src.harness.config import ExperimentConfig
from src.sensing.filters import FilterDistribution, filter_from_taps


@pytest.fixture
def gaussian():
    return FilterDistribution()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def impulse_filter():
    """Unit-impulse filter; its convolution branch is sqrt(n) I."""
    def make(n: int = 4):
        taps = np.zeros(n)
        taps[0] = 1.0
        return filter_from_taps(taps)
    return make


@pytest.fixture
def small_config():
    return ExperimentConfig(n=16, sparsity_grid=[1, 2], m_grid=[8, 32], trials_per_cell=3, root_seed=7)


@pytest.fixture
def config_file(tmp_path, small_config):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(small_config.model_dump(mode="json")), encoding="utf-8")
    return path
