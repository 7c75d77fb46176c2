import numpy as np
import pytest

import datagen
from lstm import DeepLstmModel
from numerics import SeededRng


@pytest.fixture
def rng():
    return SeededRng(1234)


@pytest.fixture(scope="session")
def short_subject():
    """A 4-channel, 10 s generated subject."""
    return datagen.generate_subject(0, master_seed=11, n_ch=4, duration=10.0)


@pytest.fixture(scope="session")
def default_subject():
    """A default-montage subject: 19 channels, 30 s at 200 Hz."""
    return datagen.generate_subject(0, master_seed=7)


@pytest.fixture
def tiny_model():
    return DeepLstmModel.create(2, SeededRng(5), hidden_size=3, dropout_rates=[0.0, 0.0])


@pytest.fixture
def random_matrix():
    def make(rows, cols, seed=0):
        return np.random.default_rng(seed).standard_normal((rows, cols))
    return make
