import numpy as np
import pytest

from unlearnkit import (Dataset, LogisticModel, LossConfig, TrainConfig,
                        scale_to_unit_ball, synth_classification, train_convex)


@pytest.fixture
def small_binary():
    ds = scale_to_unit_ball(synth_classification(80, 6, 3.0, seed=11))
    return ds


@pytest.fixture
def fitted_logreg(small_binary):
    model = LogisticModel(small_binary.dim, intercept=False)
    lcfg = LossConfig(lam=1.0, kind="logistic")
    params = train_convex(model, small_binary, TrainConfig(tolerance=1e-11), lcfg)
    return model, params, lcfg


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_dataset(n=12, d=3, seed=5, labels=(-1, 1)):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    y = rng.choice(labels, size=n)
    y[0], y[1] = labels[0], labels[1]
    return Dataset(x, y.astype(np.int64), tuple(sorted(labels)))
