import numpy as np
import pytest
import scipy.linalg

from pitsim.errors import ClosureTruncatedError, DimensionError, TrainingThresholdError
from pitsim.hamiltonians import build_aubry_andre_spin
from pitsim.histstate import build_history_state, reduced_states
from pitsim.qcore import PauliString, random_pauli_sum, random_state
from pitsim.schemas import AubryAndreParams, TrainConfig
from pitsim.vhd import (
    Adam,
    CartanAnsatz,
    apply_ansatz_W,
    apply_ansatz_to_state,
    cartan_generators,
    diagonal_model,
    diagonalized_history_builder,
    gate_letters,
    hat_hamiltonian,
    identity_offset,
    lie_closure_dim,
    offdiagonal_norm,
    parameter_count,
    recovered_spectrum,
    rotated_hamiltonian,
    vhd_cost,
    vhd_gradient,
    vhd_layer_sweep,
    vhd_train,
)


def random_ansatz(rng, n, L, tied=False):
    alpha = rng.uniform(0.0, 2.0 * np.pi, parameter_count(n, L, tied))
    return CartanAnsatz(n, L, alpha, rng.normal(size=n), tied)


def exactly_diagonalizable(rng, n, L, offset=0.0):
    """Hamiltonian W D W^dagger + offset for a random ansatz, with that ansatz"""
    ansatz = random_ansatz(rng, n, L)
    return hat_hamiltonian(ansatz) + offset * np.eye(2**n), ansatz


def test_gate_layout():
    assert gate_letters(3, 1) == ["XYI", "IXY", "YXI", "IYX"]
    assert parameter_count(4, 2) == 12
    assert parameter_count(4, 2, tied=True) == 6


def test_zero_angles_give_identity():
    np.testing.assert_allclose(apply_ansatz_W(CartanAnsatz.identity(3, 2)), np.eye(8), atol=1e-15)


def test_single_rotation_matches_expm():
    theta = 0.37
    ansatz = CartanAnsatz(2, 1, [theta, 0.0], [0.0, 0.0])
    expected = scipy.linalg.expm(1j * theta * PauliString("XY").to_matrix())
    np.testing.assert_allclose(apply_ansatz_W(ansatz), expected, atol=1e-14)


def test_ansatz_is_ordered_product(rng):
    ansatz = random_ansatz(rng, 3, 1)
    expected = np.eye(8, dtype=complex)
    for letters, theta in zip(ansatz.letters, ansatz.gate_angles):
        expected = expected @ scipy.linalg.expm(1j * theta * PauliString(letters).to_matrix())
    np.testing.assert_allclose(apply_ansatz_W(ansatz), expected, atol=1e-12)

    psi = random_state(3, rng)
    np.testing.assert_allclose(
        apply_ansatz_to_state(ansatz, psi).amplitudes, expected @ psi.amplitudes, atol=1e-12
    )


def test_parameter_lengths_validated():
    with pytest.raises(DimensionError):
        CartanAnsatz(3, 1, np.zeros(3), np.zeros(3))
    with pytest.raises(DimensionError):
        CartanAnsatz(3, 1, np.zeros(4), np.zeros(2))


def test_cost_vanishes_on_diagonal_model():
    beta = np.array([0.4, -1.1, 0.25])
    h = np.diag(diagonal_model(beta))
    assert vhd_cost(h, CartanAnsatz.identity(3, 1, beta)) == pytest.approx(0.0, abs=1e-14)


def test_cost_at_identity_is_pauli_weight(rng):
    h = random_pauli_sum(3, 5, rng)
    assert vhd_cost(h, CartanAnsatz.identity(3, 2)) == pytest.approx(h.norm_sq(), abs=1e-12)


def test_cost_matches_brute_force(rng):
    h = random_pauli_sum(3, 6, rng).to_matrix()
    ansatz = random_ansatz(rng, 3, 2)
    residual = h - hat_hamiltonian(ansatz)
    assert vhd_cost(h, ansatz) == pytest.approx(np.sum(np.abs(residual) ** 2) / 8, abs=1e-10)


def test_cost_ignores_identity_part(rng):
    h, ansatz = exactly_diagonalizable(rng, 3, 1, offset=2.5)
    assert identity_offset(h) == pytest.approx(2.5)
    assert vhd_cost(h, ansatz) == pytest.approx(0.0, abs=1e-12)
    assert offdiagonal_norm(h, ansatz) < 1e-12
    np.testing.assert_allclose(
        recovered_spectrum(ansatz, 2.5), np.linalg.eigvalsh(h)[::-1], atol=1e-10
    )


def _finite_difference(h, ansatz, step=1e-6):
    alpha_grad = np.empty(ansatz.alpha.shape[0])
    for k in range(alpha_grad.shape[0]):
        shift = np.zeros_like(alpha_grad)
        shift[k] = step
        plus = vhd_cost(h, ansatz.with_params(ansatz.alpha + shift, ansatz.beta))
        minus = vhd_cost(h, ansatz.with_params(ansatz.alpha - shift, ansatz.beta))
        alpha_grad[k] = (plus - minus) / (2 * step)
    beta_grad = np.empty(ansatz.n)
    for mu in range(ansatz.n):
        shift = np.zeros(ansatz.n)
        shift[mu] = step
        plus = vhd_cost(h, ansatz.with_params(ansatz.alpha, ansatz.beta + shift))
        minus = vhd_cost(h, ansatz.with_params(ansatz.alpha, ansatz.beta - shift))
        beta_grad[mu] = (plus - minus) / (2 * step)
    return alpha_grad, beta_grad


@pytest.mark.parametrize("tied", [False, True])
def test_gradients_match_finite_differences(rng, tied):
    h = random_pauli_sum(3, 6, rng).to_matrix()
    ansatz = random_ansatz(rng, 3, 2, tied)
    alpha_fd, beta_fd = _finite_difference(h, ansatz)
    for method in ("parameter_shift", "adjoint"):
        gradient = vhd_gradient(h, ansatz, method)
        np.testing.assert_allclose(gradient.alpha, alpha_fd, atol=1e-6)
        np.testing.assert_allclose(gradient.beta, beta_fd, atol=1e-6)


def test_adjoint_equals_parameter_shift(rng):
    h = random_pauli_sum(4, 8, rng)
    ansatz = random_ansatz(rng, 4, 2)
    shift = vhd_gradient(h, ansatz, "parameter_shift")
    adjoint = vhd_gradient(h, ansatz, "adjoint")
    np.testing.assert_allclose(adjoint.alpha, shift.alpha, atol=1e-10)
    np.testing.assert_allclose(adjoint.beta, shift.beta, atol=1e-12)
    with pytest.raises(ValueError):
        vhd_gradient(h, ansatz, "backprop")


def test_rotated_hamiltonian_is_conjugation(rng):
    h = random_pauli_sum(3, 4, rng).to_matrix()
    ansatz = random_ansatz(rng, 3, 1)
    w = apply_ansatz_W(ansatz)
    np.testing.assert_allclose(rotated_hamiltonian(h, ansatz), w.conj().T @ h @ w, atol=1e-12)


def test_adam_descends_a_quadratic():
    adam = Adam(2, lr=0.1)
    theta = np.array([1.0, -2.0])
    for _ in range(2000):
        theta = adam.step(theta, 2.0 * theta)
    assert np.linalg.norm(theta) < 5e-2


def test_two_qubit_training_converges(rng):
    h, _ = exactly_diagonalizable(rng, 2, 1, offset=0.3)
    cfg = TrainConfig(lr_alpha=0.05, lr_beta=0.05, max_iters=4000, stop_loss=1e-9, restarts=4)
    report = vhd_train(h, 2, 1, cfg)
    assert report.best_loss < 1e-6
    assert report.converged_runs >= 1
    assert report.offset == pytest.approx(0.3)
    np.testing.assert_allclose(
        recovered_spectrum(report.best_params, report.offset),
        np.linalg.eigvalsh(h)[::-1],
        atol=5e-3,
    )
    frame = report.history_frame()
    assert list(frame.columns) == ["run_id", "iter", "loss"]
    assert frame["run_id"].nunique() == 4


def test_two_qubit_training_reaches_machine_precision(rng):
    h, _ = exactly_diagonalizable(rng, 2, 1, offset=-0.7)
    cfg = TrainConfig(
        lr_alpha=0.05, lr_beta=0.05, max_iters=20000, stop_loss=1e-13, restarts=4, seed=2
    )
    report = vhd_train(h, 2, 1, cfg)
    assert report.best_loss < 1e-12
    assert offdiagonal_norm(h, report.best_params) < 1e-5


def test_best_params_are_lowest_loss_visited(rng):
    h = random_pauli_sum(2, 4, rng)
    report = vhd_train(h, 2, 1, TrainConfig(max_iters=200, restarts=3, seed=4))
    assert report.best_loss == min(float(np.min(losses)) for losses in report.loss_history)
    assert vhd_cost(h, report.best_params) == pytest.approx(report.best_loss, rel=1e-9, abs=1e-14)
    for losses, ansatz in zip(report.loss_history, report.run_params):
        assert vhd_cost(h, ansatz) == pytest.approx(float(np.min(losses)), rel=1e-9, abs=1e-14)


def test_training_is_deterministic(rng):
    h = random_pauli_sum(2, 3, rng)
    cfg = TrainConfig(max_iters=50, restarts=2, seed=9)
    first = vhd_train(h, 2, 1, cfg)
    second = vhd_train(h, 2, 1, cfg.model_copy(update={"threads": 2}))
    assert first.best_loss == second.best_loss
    np.testing.assert_array_equal(first.best_params.alpha, second.best_params.alpha)


def test_layer_sweep_table(rng):
    h = random_pauli_sum(2, 3, rng)
    table = vhd_layer_sweep(h, 2, [1, 2], TrainConfig(max_iters=20, restarts=1))
    assert list(table.columns) == ["L", "min_loss", "converged_runs"]
    assert list(table["L"]) == [1, 2]


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_lie_closure_dimension(n):
    assert lie_closure_dim(cartan_generators(n)) == n * (n - 1)


def test_lie_closure_truncation():
    generators = [PauliString("XX"), PauliString("ZI"), PauliString("IZ"), PauliString("YI")]
    with pytest.raises(ClosureTruncatedError):
        lie_closure_dim(generators, max_dim=3)


def test_builder_reproduces_history_state(rng):
    n, m, epsilon = 3, 3, 0.35
    h, ansatz = exactly_diagonalizable(rng, n, 2, offset=-0.8)
    psi0 = random_state(n, rng)
    builder = diagonalized_history_builder(ansatz, m, epsilon, loss=0.0, offset=identity_offset(h))
    built = builder.build(psi0)
    reference = build_history_state(h, psi0, m, epsilon)
    np.testing.assert_allclose(built.state.amplitudes, reference.state.amplitudes, atol=1e-10)


def test_omitting_final_rotation_keeps_clock_spectrum(rng):
    n, m, epsilon = 3, 2, 0.6
    h, ansatz = exactly_diagonalizable(rng, n, 1)
    psi0 = random_state(n, rng)
    builder = diagonalized_history_builder(ansatz, m, epsilon)
    full, _ = reduced_states(builder.build(psi0))
    trimmed, _ = reduced_states(builder.build(psi0, omit_final_rotation=True))
    np.testing.assert_allclose(full.eigenvalues(), trimmed.eigenvalues(), atol=1e-12)


def test_builder_refuses_poorly_trained_ansatz():
    ansatz = CartanAnsatz.identity(2, 1)
    with pytest.raises(TrainingThresholdError):
        diagonalized_history_builder(ansatz, 2, 0.1, loss=1e-3)


def test_spin_chain_small_training_loss_drops():
    h = build_aubry_andre_spin(AubryAndreParams(n=3, J=2.0, lam=1.0, boundary="open"))
    cfg = TrainConfig(max_iters=300, restarts=1, seed=1)
    report = vhd_train(h, 3, 2, cfg)
    history = report.loss_history[0]
    assert history[-1] < history[0]


def test_record_restores_ansatz(rng):
    ansatz = random_ansatz(rng, 3, 1)
    record = ansatz.to_record(final_loss=1e-9, seed=4)
    restored = CartanAnsatz(
        record["n"], record["L"], record["alpha"], record["beta"], record["tied"]
    )
    np.testing.assert_array_equal(restored.alpha, ansatz.alpha)
    assert record["final_loss"] == 1e-9
