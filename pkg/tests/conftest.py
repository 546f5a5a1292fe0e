"""Shared fixtures: one small trained circles net reused across suites."""

import numpy as np
import pytest

from advtraj import init_net, train
from advtraj.harness import SyntheticSpec, gen_synthetic
from advtraj.trainer import TrainConfig


@pytest.fixture(scope="session")
def circles_data():
    return gen_synthetic(SyntheticSpec(kind="circles", n=600, noise=0.03, seed=11))


@pytest.fixture(scope="session")
def circles_test_data():
    return gen_synthetic(SyntheticSpec(kind="circles", n=400, noise=0.03, seed=12))


@pytest.fixture(scope="session")
def circles_net(circles_data):
    """A quickly trained 9-block net, accurate enough for attack tests."""
    net = init_net(2, 16, 9, 2, seed=5, gain=0.5)
    cfg = TrainConfig(mode="vanilla", epochs=40, learning_rate=0.2, batch_size=64,
                      clip_norm=5.0, seed=5)
    train(net, circles_data.x, circles_data.y, cfg)
    return net


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
