import numpy as np
import pytest

from causalcap.process import random_kraus


def random_matrix(rng, d):
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def random_density(rng, d):
    g = random_matrix(rng, d)
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def apply_kraus(kraus, rho):
    return sum(K @ rho @ K.conj().T for K in kraus)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def kraus_factory(rng):
    def make(d_in, d_out, rank=None):
        return random_kraus(d_in, d_out, rng, rank)
    return make
