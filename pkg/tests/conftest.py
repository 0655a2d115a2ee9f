import numpy as np
import pytest

from spikegraph.model import NetworkSpec, PulseKernel, RateFunction, validate_network


def make_network(W, p_star=0.1, beta=1.0, ratio=0.5, rate=None, pulse=None):
    rate = rate or RateFunction("clipped-sigmoid", p_star, beta)
    pulse = pulse or PulseKernel("geometric", ratio)
    return validate_network(NetworkSpec.homogeneous(np.asarray(W, dtype=float), rate, pulse))


@pytest.fixture
def chain_network():
    """0 -> 1 -> 2 with weight 2, sigmoid p*=0.1, beta=1, geometric ratio 0.5."""
    W = np.zeros((3, 3))
    W[0, 1] = 2.0
    W[1, 2] = 2.0
    return make_network(W)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
