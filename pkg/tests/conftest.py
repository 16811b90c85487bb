"""Session fixtures shared across test modules."""
import pytest

from forestgen import make_iris_like, make_regression_dataset
from rfzip.trainer import TrainConfig, train


@pytest.fixture(scope="session")
def iris_dataset():
    return make_iris_like(seed=7)


@pytest.fixture(scope="session")
def small_trained_classifier(iris_dataset):
    return train(iris_dataset, TrainConfig(n_trees=30, seed=11))


@pytest.fixture(scope="session")
def small_trained_regressor():
    return train(make_regression_dataset(seed=3), TrainConfig(n_trees=30, seed=5))
