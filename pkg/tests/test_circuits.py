import numpy as np
import pytest

from pitsim.circuits import HADAMARD, Circuit
from pitsim.errors import DimensionError, WiringError
from pitsim.qcore import StateVector


def test_bell_preparation():
    circuit = Circuit(2, "bell").h(0).cnot(0, 1)
    state = circuit.run(StateVector.from_label("00"))
    np.testing.assert_allclose(state.amplitudes, np.array([1, 0, 0, 1]) / np.sqrt(2), atol=1e-15)


def test_gate_counts_and_depth():
    circuit = Circuit(3).h(0).h(1).cnot(0, 2).controlled_phase(1, 2, 0.3)
    circuit.gate("XX", np.kron(HADAMARD, HADAMARD), [0, 1])
    counts = circuit.gate_counts()
    assert counts == {"1q": 2, "2q": 1, "multi": 0, "controlled-1q": 2, "controlled-multi": 0}
    assert len(circuit) == 5
    # H's share layer 1, then CNOT(0,2), CP(1,2) and the two-qubit gate each wait on a wire
    assert circuit.depth() == 4


def test_controlled_phase_acts_only_on_one_one():
    circuit = Circuit(2).controlled_phase(0, 1, np.pi / 3)
    state = circuit.run(StateVector.from_label("++"))
    expected = np.array([1, 1, 1, np.exp(1j * np.pi / 3)]) / 2
    np.testing.assert_allclose(state.amplitudes, expected, atol=1e-15)


def test_extend_shifts_wires():
    inner = Circuit(1).h(0)
    outer = Circuit(2).extend(inner, offset=1)
    assert outer.records[0].targets == (1,)
    state = outer.run(StateVector.from_label("00"))
    expected = StateVector.from_label("0+")
    np.testing.assert_allclose(state.amplitudes, expected.amplitudes, atol=1e-15)


def test_wiring_errors():
    with pytest.raises(WiringError):
        Circuit(2).cnot(1, 1)
    with pytest.raises(WiringError):
        Circuit(2).h(2)
    with pytest.raises(DimensionError):
        Circuit(2).gate("bad", np.eye(2), [0, 1])
    with pytest.raises(DimensionError):
        Circuit(2).h(0).run(StateVector.from_label("0"))
