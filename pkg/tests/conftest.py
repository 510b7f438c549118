import numpy as np
import pytest

from clockink.config import Config
from clockink.pipeline import train_models
from clockink.synth import generate_drawings


@pytest.fixture(scope="session")
def small_corpus():
    return list(generate_drawings("mixed", 40, seed=101))


@pytest.fixture(scope="session")
def models(small_corpus):
    return train_models(small_corpus, Config())


@pytest.fixture(scope="session")
def recognizer(models):
    return models.recognizer


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def overwrite_segmenter():
    from clockink.pipeline import train_segmenter_on
    return train_segmenter_on(generate_drawings("overwrite", 40, seed=31))
