import numpy as np
import pytest

from pitsim.qcore import PauliSum, StateVector, random_hermitian, random_state
from pitsim.schemas import AubryAndreParams


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_instance(rng):
    """(h, psi0) on three qubits"""
    return random_hermitian(3, rng), random_state(3, rng)


@pytest.fixture
def z_hamiltonian():
    return PauliSum.from_strings(1, [(1.0, "Z")])


@pytest.fixture
def x_hamiltonian():
    return PauliSum.from_strings(1, [(1.0, "X")])


@pytest.fixture
def plus_state():
    return StateVector.from_label("+")


@pytest.fixture
def small_chain():
    return AubryAndreParams(n=4, J=2.0, lam=1.0, boundary="open")
