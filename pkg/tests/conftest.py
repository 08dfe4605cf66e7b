from pathlib import Path

import numpy as np
import pytest

from forest2text.dataset import Dataset, load_csv

DATA_DIR = Path(__file__).resolve().parents[1] / "data"


def make_dataset(features, labels, class_names=None, feature_names=None) -> Dataset:
    """Build a small in-memory Dataset for synthetic cases."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = int(labels.max()) + 1 if labels.size else 0
    if class_names is None:
        class_names = tuple(f"class{i}" for i in range(n_classes))
    if feature_names is None:
        feature_names = tuple(f"f{j}" for j in range(features.shape[1]))
    return Dataset(
        features=features,
        feature_names=tuple(feature_names),
        labels=labels,
        class_names=tuple(class_names),
    )


@pytest.fixture(scope="session")
def iris() -> Dataset:
    return load_csv(DATA_DIR / "iris.csv")


@pytest.fixture(scope="session")
def wine() -> Dataset:
    return load_csv(DATA_DIR / "wine.csv")


@pytest.fixture(scope="session")
def breast() -> Dataset:
    return load_csv(DATA_DIR / "breast_cancer.csv")
