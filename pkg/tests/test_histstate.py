import numpy as np
import pytest

from pitsim.errors import ClockIndexError, DenseCapError
from pitsim.histstate import (
    HistoryState,
    build_history_state,
    check_majorization,
    clock_wire,
    coherence_envelope,
    coherence_weight,
    condition_on_time,
    dephasing_factors,
    discretized_average_state,
    entanglement_loschmidt_bound,
    fluctuation_bound,
    history_state_circuit,
    linear_entropy,
    reduced_states,
)
from pitsim.qcore import (
    PauliSum,
    StateVector,
    propagator,
    purity,
    random_hermitian,
    random_pauli_sum,
    random_state,
)


def test_stationary_state_is_unentangled(z_hamiltonian):
    Psi = build_history_state(z_hamiltonian, StateVector.from_label("0"), m=2, epsilon=0.3)
    assert Psi.N == 4
    assert Psi.T == pytest.approx(1.2)
    assert linear_entropy(Psi) == pytest.approx(0.0, abs=1e-12)


def test_orthogonal_pair_is_half_entangled(x_hamiltonian):
    Psi = build_history_state(x_hamiltonian, StateVector.from_label("0"), m=1, epsilon=np.pi / 2)
    assert linear_entropy(Psi) == pytest.approx(0.5, abs=1e-12)


def test_circuit_matches_formula(random_instance):
    h, psi0 = random_instance
    formula = build_history_state(h, psi0, m=3, epsilon=0.37)
    circuit = build_history_state(h, psi0, m=3, epsilon=0.37, method="circuit", verify=True)
    np.testing.assert_allclose(circuit.state.amplitudes, formula.state.amplitudes, atol=1e-10)


def test_circuit_controls_clock_bits_by_weight():
    assert [clock_wire(3, j) for j in (1, 2, 3)] == [2, 1, 0]
    circuit = history_state_circuit(np.diag([1.0, -1.0]), n=1, m=3, epsilon=0.1)
    counts = circuit.gate_counts()
    assert counts["1q"] == 3
    assert counts["controlled-multi"] + counts["controlled-1q"] == 3


def test_conditioning_recovers_evolved_state(random_instance):
    h, psi0 = random_instance
    Psi = build_history_state(h, psi0, m=2, epsilon=0.5)
    for t in range(Psi.N):
        expected = propagator(h, 0.5 * t) @ psi0.amplitudes
        np.testing.assert_allclose(condition_on_time(Psi, t).amplitudes, expected, atol=1e-10)
    with pytest.raises(ClockIndexError):
        condition_on_time(Psi, Psi.N)


def test_unknown_method_and_dense_cap(z_hamiltonian):
    psi0 = StateVector.from_label("0")
    with pytest.raises(ValueError):
        build_history_state(z_hamiltonian, psi0, m=1, epsilon=0.1, method="trotter")
    with pytest.raises(DenseCapError):
        build_history_state(z_hamiltonian, psi0, m=4, epsilon=0.1, cap=3)


def test_reduced_purities_agree(random_instance):
    h, psi0 = random_instance
    Psi = build_history_state(h, psi0, m=3, epsilon=0.21)
    rho_t, rho_s = reduced_states(Psi)
    assert purity(rho_t) == pytest.approx(purity(rho_s), abs=1e-12)
    assert linear_entropy(Psi) == pytest.approx(1.0 - purity(rho_s), abs=1e-12)


@pytest.mark.parametrize("m,epsilon", [(1, 0.4), (3, 0.25), (4, 1.7)])
def test_majorization_and_loschmidt_bound(rng, m, epsilon):
    h = random_hermitian(2, rng)
    psi0 = random_state(2, rng)
    Psi = build_history_state(h, psi0, m=m, epsilon=epsilon)
    report = check_majorization(Psi, h)
    assert report.holds, report.max_violation
    bound = entanglement_loschmidt_bound(Psi, h, psi0)
    assert bound.E2 <= 1.0 - bound.Lbar + 1e-12
    assert bound.slack >= -1e-12


def test_fluctuation_bound_single_qubit(z_hamiltonian, plus_state):
    Psi = build_history_state(z_hamiltonian, plus_state, m=2, epsilon=0.3)
    observable = PauliSum.from_strings(1, [(1.0, "X")])
    report = fluctuation_bound(Psi, z_hamiltonian, plus_state, observable)
    assert report.sigma2 == pytest.approx(0.5)
    assert report.delta2 == pytest.approx(4.0)
    assert report.Lbar == pytest.approx(0.5)
    assert report.sigma2 <= report.bound + 1e-12


def test_fluctuation_bound_random(random_instance):
    h, psi0 = random_instance
    Psi = build_history_state(h, psi0, m=3, epsilon=0.8)
    observable = PauliSum.from_strings(3, [(1.0, "ZII"), (0.5, "XXI")])
    report = fluctuation_bound(Psi, h, psi0, observable)
    assert report.sigma2 <= report.bound + 1e-12


def test_periodic_window_dephases_exactly(plus_state):
    h = PauliSum.from_strings(1, [(1.0, "Z"), (1.0, "I")])
    Psi = build_history_state(h, plus_state, m=1, epsilon=np.pi / 2)
    _, rho_s = reduced_states(Psi)
    np.testing.assert_allclose(rho_s.matrix, np.eye(2) / 2, atol=1e-12)
    report = check_majorization(Psi, h)
    np.testing.assert_allclose(report.spectrum_rho_s, report.spectrum_rho_bar, atol=1e-12)


def test_discretized_average_equals_system_reduction(random_instance):
    h, psi0 = random_instance
    Psi = build_history_state(h, psi0, m=3, epsilon=0.45)
    _, rho_s = reduced_states(Psi)
    rho_tilde = discretized_average_state(h, psi0, Psi.N, Psi.epsilon)
    np.testing.assert_allclose(rho_tilde.matrix, rho_s.matrix, atol=1e-10)


def test_dephasing_factors_shape():
    factors = dephasing_factors(np.array([0.0, 1.0, 2.0 * np.pi]), N=8, epsilon=1.0)
    np.testing.assert_allclose(np.diag(factors), 1.0)
    # gaps that are multiples of 2 pi never dephase
    assert factors[0, 2] == pytest.approx(1.0)
    assert abs(factors[0, 1]) < 1.0


def test_coherence_stays_below_envelope(random_instance):
    h, psi0 = random_instance
    for m in (1, 2, 4, 6):
        Psi = build_history_state(h, psi0, m=m, epsilon=0.3)
        _, rho_s = reduced_states(Psi)
        assert coherence_weight(rho_s, h) <= coherence_envelope(h, psi0, Psi.N, 0.3) + 1e-12


def test_history_state_validates_shape():
    with pytest.raises(ValueError):
        HistoryState(StateVector.from_label("00"), n=1, m=1, epsilon=0.5, T=2.0)


def test_bounds_hold_on_random_instances(rng):
    for _ in range(200):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 4))
        epsilon = float(rng.uniform(0.05, 2.0))
        h = random_hermitian(n, rng)
        psi0 = random_state(n, rng)
        observable = random_pauli_sum(n, 3, rng)
        Psi = build_history_state(h, psi0, m=m, epsilon=epsilon)
        assert check_majorization(Psi, h).max_violation < 1e-12
        bound = entanglement_loschmidt_bound(Psi, h, psi0)
        assert bound.E2 <= 1.0 - bound.Lbar + 1e-12
        report = fluctuation_bound(Psi, h, psi0, observable)
        assert report.sigma2 <= report.delta2 * report.Lbar + 1e-12
        assert report.delta2 * report.Lbar <= report.bound + 1e-12


def test_periodic_window_saturates_loschmidt_bound(plus_state):
    h = PauliSum.from_strings(1, [(1.0, "Z"), (1.0, "I")])
    Psi = build_history_state(h, plus_state, m=1, epsilon=np.pi / 2)
    echoes = [
        abs(np.vdot(plus_state.amplitudes, condition_on_time(Psi, t).amplitudes)) ** 2
        for t in range(Psi.N)
    ]
    bound = entanglement_loschmidt_bound(Psi, h, plus_state)
    assert bound.slack == pytest.approx(0.0, abs=1e-12)
    assert bound.E2 == pytest.approx(0.5, abs=1e-12)
    assert linear_entropy(Psi) == pytest.approx(1.0 - np.mean(echoes), abs=1e-12)


def test_doubling_the_clock_never_adds_coherence(random_instance):
    h, psi0 = random_instance
    weights = []
    for m in range(1, 7):
        _, rho_s = reduced_states(build_history_state(h, psi0, m=m, epsilon=0.3))
        weights.append(coherence_weight(rho_s, h))
    assert all(later <= earlier + 1e-12 for earlier, later in zip(weights, weights[1:]))
    assert weights[-1] < weights[0]
