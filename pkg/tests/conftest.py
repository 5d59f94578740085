import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qdp.train import TrainingConfig, bundled_iris_path, load_iris, preprocess, train


@pytest.fixture(scope="session")
def iris_raw():
    return load_iris(bundled_iris_path())


@pytest.fixture(scope="session")
def dataset(iris_raw):
    features, labels = iris_raw
    return preprocess(features, labels, split_seed=0)


@pytest.fixture(scope="session")
def quick_model(dataset):
    """Three-epoch model for tests that only need a plausible artifact."""
    return train(dataset, TrainingConfig(seed=0, epochs=3))


@pytest.fixture(scope="session")
def trained_model(dataset):
    """Fully trained seed-0 model (reaches 100% train/test accuracy)."""
    return train(dataset, TrainingConfig(seed=0))
