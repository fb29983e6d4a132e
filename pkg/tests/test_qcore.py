import numpy as np
import pytest
import scipy.linalg

from pitsim.errors import DenseCapError, HermiticityError, WiringError
from pitsim.qcore import (
    DensityMatrix,
    PauliString,
    PauliSum,
    StateVector,
    apply_controlled,
    apply_unitary,
    expectation,
    fidelity_up_to_phase,
    hermitian_eig,
    partial_trace,
    pauli_sum_to_matrix,
    propagator,
    purity,
    random_density_matrix,
    random_hermitian,
    random_pauli_sum,
    random_state,
    random_unitary,
    schmidt_spectrum,
)


def test_single_z_matrix():
    h = PauliSum.from_strings(1, [(1.0, "Z")])
    np.testing.assert_allclose(pauli_sum_to_matrix(h), np.diag([1.0, -1.0]))


def test_xx_plus_yy_swaps_single_excitations():
    h = PauliSum.from_strings(2, [(0.5, "XX"), (0.5, "YY")])
    expected = np.zeros((4, 4))
    expected[1, 2] = expected[2, 1] = 1.0
    np.testing.assert_allclose(h.to_matrix(), expected, atol=1e-15)


def test_pauli_sum_matches_kronecker_products(rng):
    h = random_pauli_sum(3, 6, rng)
    reference = np.zeros((8, 8), dtype=complex)
    for term in h.terms:
        product = np.ones((1, 1))
        for letter in term.letters:
            product = np.kron(product, PauliString(letter).to_matrix())
        reference += term.coefficient * product
    np.testing.assert_allclose(h.to_matrix(), reference, atol=1e-14)
    eigs = np.sort(np.linalg.eigvals(reference).real)
    np.testing.assert_allclose(np.sort(hermitian_eig(h).eigenvalues), eigs, atol=1e-9)


def test_dense_cap_is_enforced():
    h = PauliSum.from_strings(3, [(1.0, "ZZZ")])
    with pytest.raises(DenseCapError):
        pauli_sum_to_matrix(h, cap=2)


def test_pauli_products_and_commutation():
    product = PauliString("X").multiply(PauliString("Y"))
    assert product.letters == "Z"
    assert product.coefficient == pytest.approx(1j)
    assert PauliString("XY").commutes_with(PauliString("YX"))
    assert not PauliString("XI").commutes_with(PauliString("ZI"))


def test_pauli_apply_matches_matrix(rng):
    term = PauliString("XYZ", 0.3 - 0.2j)
    vector = rng.normal(size=8) + 1j * rng.normal(size=8)
    np.testing.assert_allclose(term.apply(vector), term.to_matrix() @ vector, atol=1e-14)


def test_hermitian_eig_diagonal_and_pauli_x():
    spectrum = hermitian_eig(np.diag([1.0, -1.0]))
    np.testing.assert_allclose(spectrum.eigenvalues, [1.0, -1.0])
    np.testing.assert_allclose(np.abs(spectrum.eigenvectors), np.eye(2), atol=1e-15)

    spectrum = hermitian_eig(PauliString("X").to_matrix())
    np.testing.assert_allclose(spectrum.eigenvalues, [1.0, -1.0])
    plus = StateVector.from_label("+")
    minus = StateVector.from_label("-")
    top = StateVector(spectrum.eigenvectors[:, 0])
    bottom = StateVector(spectrum.eigenvectors[:, 1])
    assert fidelity_up_to_phase(top, plus) == pytest.approx(1.0)
    assert fidelity_up_to_phase(bottom, minus) == pytest.approx(1.0)


def test_label_rejects_unknown_characters():
    with pytest.raises(ValueError, match="Unknown state label"):
        StateVector.from_label("0a")


def test_hermitian_eig_reconstructs(rng):
    h = random_hermitian(3, rng)
    spectrum = hermitian_eig(h)
    assert np.all(np.diff(spectrum.eigenvalues) <= 0)
    assert np.max(np.abs(spectrum.reconstruct() - h)) < 1e-10


def test_hermitian_eig_rejects_non_hermitian():
    with pytest.raises(HermiticityError):
        hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_propagator_cases(rng):
    h = random_hermitian(3, rng)
    np.testing.assert_allclose(propagator(h, 0.0), np.eye(8), atol=1e-12)
    np.testing.assert_allclose(
        propagator(np.diag([1.0, -1.0]), np.pi / 2),
        np.diag([np.exp(-1j * np.pi / 2), np.exp(1j * np.pi / 2)]),
        atol=1e-14,
    )
    np.testing.assert_allclose(propagator(h, 0.7), scipy.linalg.expm(-0.7j * h), atol=1e-9)


def test_propagator_unitary_and_group_property(rng):
    h = random_hermitian(2, rng)
    u = propagator(h, 1.3)
    assert np.max(np.abs(u.conj().T @ u - np.eye(4))) < 1e-10
    np.testing.assert_allclose(propagator(h, 0.4) @ propagator(h, 0.9), u, atol=1e-9)


def test_partial_trace_product_and_bell():
    product = StateVector.from_label("0+")
    reduced = partial_trace(product, (1, 1), "A")
    np.testing.assert_allclose(reduced.matrix, np.diag([1.0, 0.0]), atol=1e-15)

    bell = StateVector.from_amplitudes([1, 0, 0, 1])
    for keep in ("A", "B"):
        reduced = partial_trace(bell, (1, 1), keep)
        np.testing.assert_allclose(reduced.matrix, np.eye(2) / 2, atol=1e-15)


def test_partial_trace_of_density_matrix_matches_pure_path(rng):
    psi = random_state(3, rng)
    from_vector = partial_trace(psi, (1, 2), "B")
    from_matrix = partial_trace(psi.to_density_matrix(), (1, 2), "B")
    np.testing.assert_allclose(from_vector.matrix, from_matrix.matrix, atol=1e-13)


def test_schmidt_symmetry(rng):
    psi = random_state(5, rng)
    purity_a = purity(partial_trace(psi, (2, 3), "A"))
    purity_b = purity(partial_trace(psi, (2, 3), "B"))
    assert purity_a == pytest.approx(purity_b, abs=1e-12)
    assert purity_a == pytest.approx(np.sum(schmidt_spectrum(psi, 2) ** 2), abs=1e-12)


def test_purity_values(rng):
    assert purity(StateVector.from_label("01").to_density_matrix()) == pytest.approx(1.0)
    assert purity(DensityMatrix.maximally_mixed(1)) == pytest.approx(0.5)
    rho = random_density_matrix(2, rng)
    assert purity(rho) == pytest.approx(np.sum(rho.eigenvalues() ** 2), abs=1e-12)
    assert 0.25 <= purity(rho) <= 1.0 + 1e-12


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValueError):
        StateVector(np.array([1.0, 1.0]))


def test_apply_controlled_cases(rng):
    zero_control = StateVector.from_label("00")
    x = PauliString("X").to_matrix()
    untouched = apply_controlled(zero_control, 0, x, [1])
    np.testing.assert_allclose(untouched.amplitudes, zero_control.amplitudes)

    flipped = apply_controlled(StateVector.from_label("10"), 0, x, [1])
    np.testing.assert_allclose(flipped.amplitudes, StateVector.from_label("11").amplitudes)

    psi = random_state(3, rng)
    u = random_unitary(2, rng)
    dense = np.kron(np.diag([1.0, 0.0]), np.eye(4)) + np.kron(np.diag([0.0, 1.0]), u)
    controlled = apply_controlled(psi, 0, u, [1, 2])
    np.testing.assert_allclose(controlled.amplitudes, dense @ psi.amplitudes, atol=1e-12)


def test_apply_controlled_rejects_overlap():
    with pytest.raises(WiringError):
        apply_controlled(StateVector.from_label("00"), 1, PauliString("X").to_matrix(), [1])


def test_apply_unitary_on_reordered_wires(rng):
    psi = random_state(3, rng)
    u = random_unitary(2, rng)
    swap = np.eye(4)[[0, 2, 1, 3]]
    dense = np.kron(np.eye(2), swap @ u @ swap)
    swapped = apply_unitary(psi, u, [2, 1])
    np.testing.assert_allclose(swapped.amplitudes, dense @ psi.amplitudes, atol=1e-12)


def test_expectation_pauli_sum_and_dense(rng):
    psi = random_state(2, rng)
    h = random_pauli_sum(2, 4, rng)
    assert expectation(psi, h) == pytest.approx(expectation(psi, h.to_matrix()), abs=1e-13)
