import numpy as np
import pytest
from hypothesis import settings

from scorestack.data import Dataset

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture
def small_labeled() -> Dataset:
    """120 points, 4 features, 12 shifted outliers; fixed seed."""
    rng = np.random.default_rng(7)
    X = rng.standard_normal((120, 4))
    X[:12, :2] += 3.5
    y = np.zeros(120, dtype=np.int64)
    y[:12] = 1
    perm = rng.permutation(120)
    return Dataset(features=X[perm], labels=y[perm], name="small")


def make_tos(train_scores, test_scores, train_roc):
    """Hand-built TosMatrix with placeholder specs."""
    from scorestack.detectors import DetectorSpec
    from scorestack.tos import TosMatrix

    train_scores = np.asarray(train_scores, dtype=float)
    test_scores = np.asarray(test_scores, dtype=float)
    k = train_scores.shape[1]
    specs = [DetectorSpec(kind="KNN", k=i + 1) for i in range(k)]
    return TosMatrix(
        train_scores=train_scores.copy(),
        test_scores=test_scores.copy(),
        specs=specs,
        train_roc=np.asarray(train_roc, dtype=float).copy(),
    )
