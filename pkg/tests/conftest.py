import numpy as np
import pytest

from fscond.ansatz import AnsatzSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_spec():
    """4 qubits, 2 layers: big enough to entangle, cheap enough to brute-force."""
    return AnsatzSpec(num_qubits=4, num_layers=2, feature_dim=4)


@pytest.fixture
def tiny_spec():
    """2 qubits, 1 layer: used wherever full finite differencing over all
    weights has to stay fast."""
    return AnsatzSpec(num_qubits=2, num_layers=1, feature_dim=2)


def random_instance(spec, rng, theta_low=0.0, theta_high=np.pi):
    x = rng.normal(size=spec.feature_dim)
    theta = rng.uniform(theta_low, theta_high, size=spec.num_params)
    return x, theta
