import numpy as np
import pytest

from hselab.bases import BasisSet, qubit_six_state_set, qutrit_complete_set, random_basis
from hselab.rng import RandomStream


@pytest.fixture(scope="session")
def sixstate():
    return qubit_six_state_set()


@pytest.fixture(scope="session")
def qutrit4():
    return qutrit_complete_set()


def make_random_basis(d, seed, label="random"):
    return random_basis(d, RandomStream(seed, "test-basis"), label=label)


def make_random_set(d, c, seed):
    return BasisSet(make_random_basis(d, seed * 1000 + j, label=f"r{j}") for j in range(c))


def freq_tolerance(p, n, sigmas=4.0):
    """Allowed deviation of an empirical frequency from p over n samples."""
    return sigmas * np.sqrt(p * (1.0 - p) / n)
