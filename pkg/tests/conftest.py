"""
Shared fixtures: small architectures of every kind and reference systems
"""
import numpy as np
import pytest

from tsympnets.dynamics import hamiltonians
from tsympnets.networks import sympnet

SMALL_ARCH = {
    'TG':{'layers':4,'width':5},
    'NATG':{'layers':4,'width':5},
    'OTLA':{'layers':3,'sublayers':3},
    'TLA':{'layers':3,'sublayers':3},
    'NATLA':{'layers':3,'sublayers':3},
}


def perturbed(model,seed=0,scale=0.3):
    """
    Model with parameters pushed away from the small initial values
    """
    rng = np.random.default_rng(seed)
    theta = sympnet.flatten_params(model)
    return sympnet.unflatten_params(model,theta + rng.normal(0.0,scale,theta.shape))


@pytest.fixture(params=sympnet.KINDS)
def kind(request):
    return request.param


@pytest.fixture
def small_model(kind):
    return perturbed(sympnet.init_model(kind,1,SMALL_ARCH[kind],seed=3),seed=11)


@pytest.fixture(scope="session")
def pendulum():
    return hamiltonians.pendulum()


@pytest.fixture(scope="session")
def forced_oscillator():
    return hamiltonians.forced_harmonic_oscillator()


@pytest.fixture(scope="session")
def linear_system():
    return hamiltonians.linear_nonseparable()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
