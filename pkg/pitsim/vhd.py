"""
Variational Hamiltonian diagonalization with a Cartan-inspired brickwork ansatz.

The ansatz is W(alpha) = G_1 G_2 ... G_K with G_k = exp(i theta_k P_k). Each
layer holds the XY rotations on bonds (j, j+1) for j = 1..n-1 followed by the
YX rotations on the same bonds. The diagonal model is D(beta) = sum_mu beta_mu Z_mu
and the cost is ||H - W D W^dagger||_HS^2 / 2^n with the identity part of H
removed (it only contributes a phase, and D has no identity term).
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from pitsim.circuits import Circuit
from pitsim.errors import ClosureTruncatedError, DimensionError, TrainingThresholdError
from pitsim.histstate import HistoryState, clock_wire
from pitsim.qcore import (
    PAULI_MATRICES,
    PauliString,
    StateVector,
    as_dense,
    check_dense_cap,
    pauli_monomial,
)
from pitsim.schemas import TrainConfig

logger = logging.getLogger(__name__)

SHIFT = np.pi / 4


def bond_letters(n: int, j: int, flavor: str) -> str:
    """Two-qubit Pauli string on wires (j, j+1); flavor 'XY' or 'YX'"""
    letters = ["I"] * n
    letters[j], letters[j + 1] = flavor[0], flavor[1]
    return "".join(letters)


def layer_letters(n: int) -> List[str]:
    return [bond_letters(n, j, "XY") for j in range(n - 1)] + [
        bond_letters(n, j, "YX") for j in range(n - 1)
    ]


def gate_letters(n: int, L: int) -> List[str]:
    return layer_letters(n) * L


def cartan_generators(n: int) -> List[PauliString]:
    return [PauliString(letters) for letters in layer_letters(n)]


def parameter_count(n: int, L: int, tied: bool = False) -> int:
    return (n - 1) * L if tied else 2 * (n - 1) * L


@dataclass(frozen=True)
class CartanAnsatz:
    n: int
    L: int
    alpha: np.ndarray
    beta: np.ndarray
    tied: bool = False

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).ravel()
        beta = np.array(self.beta, dtype=float).ravel()
        if self.n < 2 or self.L < 1:
            raise ValueError("Ansatz needs n >= 2 and L >= 1")
        expected = parameter_count(self.n, self.L, self.tied)
        if alpha.shape[0] != expected:
            raise DimensionError(f"alpha needs {expected} angles, got {alpha.shape[0]}")
        if beta.shape[0] != self.n:
            raise DimensionError(f"beta needs {self.n} coefficients, got {beta.shape[0]}")
        alpha.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def identity(cls, n: int, L: int, beta=None, tied: bool = False) -> "CartanAnsatz":
        beta = np.zeros(n) if beta is None else beta
        return cls(n, L, np.zeros(parameter_count(n, L, tied)), beta, tied)

    @property
    def letters(self) -> List[str]:
        return gate_letters(self.n, self.L)

    @property
    def gate_angles(self) -> np.ndarray:
        """One angle per gate; tied angles are shared by the XY and YX gates of a bond"""
        if not self.tied:
            return np.array(self.alpha)
        per_layer = self.alpha.reshape(self.L, self.n - 1)
        return np.concatenate([per_layer, per_layer], axis=1).ravel()

    def fold_gate_gradient(self, gate_gradient: np.ndarray) -> np.ndarray:
        """Map per-gate derivatives onto the free parameters"""
        if not self.tied:
            return gate_gradient
        per_layer = gate_gradient.reshape(self.L, 2, self.n - 1)
        return per_layer.sum(axis=1).ravel()

    def with_params(self, alpha, beta) -> "CartanAnsatz":
        return CartanAnsatz(self.n, self.L, alpha, beta, self.tied)

    def to_record(self, final_loss: float, seed: int) -> dict:
        return {
            "n": self.n,
            "L": self.L,
            "alpha": [float(x) for x in self.alpha],
            "beta": [float(x) for x in self.beta],
            "tied": self.tied,
            "final_loss": float(final_loss),
            "seed": int(seed),
        }


def _left_pauli(letters: str, matrix: np.ndarray) -> np.ndarray:
    flip, phases = pauli_monomial(letters)
    index = np.arange(matrix.shape[0])
    out = np.empty_like(matrix)
    out[index ^ flip] = phases[:, None] * matrix
    return out


def _right_pauli(letters: str, matrix: np.ndarray) -> np.ndarray:
    flip, phases = pauli_monomial(letters)
    index = np.arange(matrix.shape[1])
    return matrix[:, index ^ flip] * phases[None, :]


def _conjugate(letters: str, theta: float, matrix: np.ndarray, adjoint_first: bool) -> np.ndarray:
    """G^dagger M G when adjoint_first, else G M G^dagger, for G = exp(i theta P)"""
    c, s = np.cos(theta), np.sin(theta)
    mp = _right_pauli(letters, matrix)
    pm = _left_pauli(letters, matrix)
    pmp = _right_pauli(letters, pm)
    sign = 1.0 if adjoint_first else -1.0
    return c * c * matrix + sign * 1j * c * s * (mp - pm) + s * s * pmp


def _rotate_through(matrix: np.ndarray, letters: Sequence[str], angles: np.ndarray) -> np.ndarray:
    """W^dagger M W for W = G_1 ... G_K"""
    for letter, theta in zip(letters, angles):
        matrix = _conjugate(letter, theta, matrix, adjoint_first=True)
    return matrix


def z_signs(n: int) -> np.ndarray:
    """z[mu, b] = +1 if wire mu of basis index b is 0, else -1"""
    index = np.arange(2**n)
    return np.array([1 - 2 * ((index >> (n - 1 - mu)) & 1) for mu in range(n)], dtype=float)


def diagonal_model(beta: Sequence[float]) -> np.ndarray:
    """Diagonal of D(beta) = sum_mu beta_mu Z_mu"""
    beta = np.asarray(beta, dtype=float)
    return beta @ z_signs(beta.shape[0])


def apply_ansatz_W(a: CartanAnsatz, cap: Optional[int] = None) -> np.ndarray:
    """Dense W(alpha) = G_1 ... G_K"""
    check_dense_cap(a.n, cap)
    w = np.eye(2**a.n, dtype=complex)
    for letters, theta in zip(a.letters, a.gate_angles):
        w = np.cos(theta) * w + 1j * np.sin(theta) * _right_pauli(letters, w)
    return w


def apply_ansatz_to_state(a: CartanAnsatz, psi: StateVector) -> StateVector:
    """W(alpha)|psi> without forming W"""
    vector = psi.amplitudes.copy()
    for letters, theta in reversed(list(zip(a.letters, a.gate_angles))):
        pauli = PauliString(letters)
        vector = np.cos(theta) * vector + 1j * np.sin(theta) * pauli.apply(vector)
    return StateVector(vector)


def hat_hamiltonian(a: CartanAnsatz) -> np.ndarray:
    """W D W^dagger"""
    w = apply_ansatz_W(a)
    return (w * diagonal_model(a.beta)) @ w.conj().T


def rotated_hamiltonian(h, a: CartanAnsatz) -> np.ndarray:
    """W^dagger H W"""
    return _rotate_through(as_dense(h), a.letters, a.gate_angles)


def offdiagonal_norm(h, a: CartanAnsatz) -> float:
    rotated = rotated_hamiltonian(h, a)
    return float(np.max(np.abs(rotated - np.diag(np.diag(rotated)))))


def identity_offset(h) -> float:
    """Tr[H] / 2^n; D(beta) has no identity part, so the cost is taken on H minus this"""
    matrix = as_dense(h)
    return float(np.real(np.trace(matrix))) / matrix.shape[0]


def _traceless(matrix: np.ndarray) -> np.ndarray:
    return matrix - identity_offset(matrix) * np.eye(matrix.shape[0])


def recovered_spectrum(a: CartanAnsatz, offset: float = 0.0) -> np.ndarray:
    """Eigenvalues of D(beta) + offset, descending"""
    return np.sort(diagonal_model(a.beta) + offset)[::-1]


def _cost_from_rotated(rotated_diag: np.ndarray, hs_norm: float, beta: np.ndarray) -> float:
    dim = rotated_diag.shape[0]
    cross = 2.0 / dim * float(np.real(rotated_diag @ diagonal_model(beta)))
    return max(0.0, hs_norm + float(beta @ beta) - cross)


def _hs_norm(matrix: np.ndarray) -> float:
    return float(np.sum(np.abs(matrix) ** 2) / matrix.shape[0])


def vhd_cost(h, a: CartanAnsatz) -> float:
    """||H0 - W D W^dagger||_HS^2 / 2^n for the traceless part H0 of h, evaluated exactly"""
    matrix = _traceless(as_dense(h))
    check_dense_cap(a.n)
    rotated = _rotate_through(matrix, a.letters, a.gate_angles)
    return _cost_from_rotated(np.diag(rotated), _hs_norm(matrix), a.beta)


class Gradient(NamedTuple):
    alpha: np.ndarray
    beta: np.ndarray


def _beta_gradient(rotated_diag: np.ndarray, beta: np.ndarray) -> np.ndarray:
    dim = rotated_diag.shape[0]
    return 2.0 * beta - 2.0 / dim * np.real(z_signs(beta.shape[0]) @ rotated_diag)


def _adjoint_pass(
    matrix: np.ndarray, letters: Sequence[str], angles: np.ndarray, beta: np.ndarray
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Loss, per-gate derivative and beta-gradient from one backward and one forward sweep"""
    dim = matrix.shape[0]
    K = len(letters)
    backward = [None] * K
    current = np.diag(diagonal_model(beta)).astype(complex)
    for k in range(K - 1, -1, -1):
        backward[k] = current
        current = _conjugate(letters[k], angles[k], current, adjoint_first=False)

    gate_gradient = np.empty(K)
    forward = matrix
    for k in range(K):
        forward = _conjugate(letters[k], angles[k], forward, adjoint_first=True)
        trace = np.sum(_right_pauli(letters[k], forward) * backward[k].T)
        gate_gradient[k] = 4.0 / dim * float(np.imag(trace))
    rotated_diag = np.diag(forward)
    loss = _cost_from_rotated(rotated_diag, _hs_norm(matrix), beta)
    return loss, gate_gradient, _beta_gradient(rotated_diag, beta)


def _shift_gate_gradient(
    matrix: np.ndarray, letters: Sequence[str], angles: np.ndarray, beta: np.ndarray
) -> np.ndarray:
    hs_norm = _hs_norm(matrix)
    gradient = np.empty(len(letters))
    for k in range(len(letters)):
        costs = []
        for shift in (SHIFT, -SHIFT):
            shifted = np.array(angles)
            shifted[k] += shift
            rotated = _rotate_through(matrix, letters, shifted)
            costs.append(_cost_from_rotated(np.diag(rotated), hs_norm, beta))
        gradient[k] = costs[0] - costs[1]
    return gradient


def vhd_gradient(h, a: CartanAnsatz, method: str = "parameter_shift") -> Gradient:
    """Gradient of vhd_cost over (alpha, beta)"""
    matrix = _traceless(as_dense(h))
    check_dense_cap(a.n)
    angles = a.gate_angles
    if method == "parameter_shift":
        gate_gradient = _shift_gate_gradient(matrix, a.letters, angles, a.beta)
        rotated = _rotate_through(matrix, a.letters, angles)
        beta_gradient = _beta_gradient(np.diag(rotated), a.beta)
    elif method == "adjoint":
        _, gate_gradient, beta_gradient = _adjoint_pass(matrix, a.letters, angles, a.beta)
    else:
        raise ValueError(f"Unknown gradient method {method!r}")
    return Gradient(a.fold_gate_gradient(gate_gradient), beta_gradient)


class Adam:
    """Adaptive moment estimation on a flat parameter vector"""

    def __init__(self, size: int, lr: float, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.b1 = b1
        self.b2 = b2
        self.eps = eps
        self.t = 0
        self.m = np.zeros(size)
        self.v = np.zeros(size)

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad**2
        m_hat = self.m / (1 - self.b1**self.t)
        v_hat = self.v / (1 - self.b2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainReport:
    loss_history: List[np.ndarray]
    best_loss: float
    best_params: CartanAnsatz
    converged_runs: int
    run_params: List[CartanAnsatz] = field(default_factory=list)
    seed: int = 0
    offset: float = 0.0

    def history_frame(self) -> pd.DataFrame:
        """Long table (run_id, iter, loss)"""
        frames = [
            pd.DataFrame({"run_id": run, "iter": np.arange(len(losses)), "loss": losses})
            for run, losses in enumerate(self.loss_history)
        ]
        return pd.concat(frames, ignore_index=True)


class VHDTrainer:
    """Restarted ADAM minimization of the diagonalization cost"""

    def __init__(self, h, n: int, L: int, cfg: TrainConfig):
        check_dense_cap(n)
        matrix = as_dense(h)
        if matrix.shape[0] != 2**n:
            raise DimensionError(f"Hamiltonian of size {matrix.shape[0]} is not on {n} qubits")
        self.offset = identity_offset(matrix)
        self.matrix = _traceless(matrix)
        self.n = n
        self.L = L
        self.cfg = cfg
        self.letters = gate_letters(n, L)
        self.scale = float(np.max(np.abs(self.matrix)))
        logger.info(
            f"VHD trainer ready: n={n}, L={L}, {parameter_count(n, L, cfg.tied)} angles, "
            f"{cfg.restarts} restarts"
        )

    def initial_ansatz(self, rng: np.random.Generator) -> CartanAnsatz:
        alpha = rng.uniform(0.0, 2.0 * np.pi, size=parameter_count(self.n, self.L, self.cfg.tied))
        beta = rng.uniform(-self.scale, self.scale, size=self.n)
        return CartanAnsatz(self.n, self.L, alpha, beta, self.cfg.tied)

    def loss_and_gradient(self, a: CartanAnsatz) -> Tuple[float, Gradient]:
        if self.cfg.gradient == "adjoint":
            loss, gate_gradient, beta_gradient = _adjoint_pass(
                self.matrix, self.letters, a.gate_angles, a.beta
            )
            return loss, Gradient(a.fold_gate_gradient(gate_gradient), beta_gradient)
        return vhd_cost(self.matrix, a), vhd_gradient(self.matrix, a, "parameter_shift")

    def run(self, restart: int) -> Tuple[np.ndarray, CartanAnsatz]:
        """Loss history of one restart and the lowest-loss ansatz it visited"""
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(self.cfg.seed, spawn_key=(restart,)))
        )
        ansatz = self.initial_ansatz(rng)
        adam_alpha = Adam(ansatz.alpha.shape[0], self.cfg.lr_alpha)
        adam_beta = Adam(self.n, self.cfg.lr_beta)
        losses = []
        best_loss, best_ansatz = np.inf, ansatz
        for iteration in range(self.cfg.max_iters):
            loss, gradient = self.loss_and_gradient(ansatz)
            losses.append(loss)
            if loss < best_loss:
                best_loss, best_ansatz = loss, ansatz
            if loss < self.cfg.stop_loss:
                break
            if iteration % self.cfg.log_every == 0:
                logger.debug("Run %d iter %d loss %.3e", restart, iteration, loss)
            ansatz = ansatz.with_params(
                adam_alpha.step(ansatz.alpha, gradient.alpha),
                adam_beta.step(ansatz.beta, gradient.beta),
            )
        history = np.array(losses)
        if best_loss >= self.cfg.stop_loss:
            logger.warning(
                "Run %d stopped at %d iterations, best loss %.3e", restart, len(history), best_loss
            )
        else:
            logger.info("Run %d converged in %d iterations", restart, len(history))
        return history, best_ansatz

    def train(self) -> TrainReport:
        restarts = range(self.cfg.restarts)
        if self.cfg.threads > 1:
            results = Parallel(n_jobs=self.cfg.threads, prefer="threads")(
                delayed(self.run)(r) for r in restarts
            )
        else:
            results = [self.run(r) for r in restarts]
        histories = [history for history, _ in results]
        params = [ansatz for _, ansatz in results]
        lowest = np.array([np.min(history) for history in histories])
        best = int(np.argmin(lowest))
        return TrainReport(
            loss_history=histories,
            best_loss=float(lowest[best]),
            best_params=params[best],
            converged_runs=int(np.sum(lowest < self.cfg.stop_loss)),
            run_params=params,
            seed=self.cfg.seed,
            offset=self.offset,
        )


def vhd_train(h, n: int, L: int, cfg: TrainConfig) -> TrainReport:
    return VHDTrainer(h, n, L, cfg).train()


def vhd_layer_sweep(h, n: int, layers: Iterable[int], cfg: TrainConfig) -> pd.DataFrame:
    """Best final loss against ansatz depth"""
    rows = []
    for L in layers:
        report = vhd_train(h, n, L, cfg)
        rows.append(
            {"L": L, "min_loss": report.best_loss, "converged_runs": report.converged_runs}
        )
        logger.info("Layer sweep L=%d: min loss %.3e", L, report.best_loss)
    return pd.DataFrame(rows)


def lie_closure_dim(generators: Iterable[PauliString], max_dim: int = 4096) -> int:
    """
    Dimension of the Lie algebra generated by i*generators.

    Commutators of Pauli strings are Pauli strings (zero when they commute), so
    the closure is enumerated over phase-free strings.
    """
    seen = set()
    elements: List[Tuple[int, int]] = []
    queue = deque()
    for generator in generators:
        key = generator.symplectic
        if key != (0, 0) and key not in seen:
            seen.add(key)
            elements.append(key)
            queue.append(key)

    while queue:
        x1, z1 = queue.popleft()
        for x2, z2 in list(elements):
            if bin((x1 & z2) ^ (z1 & x2)).count("1") % 2 == 0:
                continue
            key = (x1 ^ x2, z1 ^ z2)
            if key in seen:
                continue
            seen.add(key)
            elements.append(key)
            queue.append(key)
            if len(seen) > max_dim:
                raise ClosureTruncatedError(len(seen), max_dim)
    return len(seen)


def _rotation_gate(letters: str, theta: float) -> Tuple[np.ndarray, List[int]]:
    """4x4 exp(i theta P_a P_b) and its wires"""
    wires = [w for w, letter in enumerate(letters) if letter != "I"]
    pauli = np.kron(PAULI_MATRICES[letters[wires[0]]], PAULI_MATRICES[letters[wires[1]]])
    return np.cos(theta) * np.eye(4) + 1j * np.sin(theta) * pauli, wires


@dataclass(frozen=True)
class DiagonalizedHistoryBuilder:
    """History-state circuit with U(eps t) = W exp(-i D eps t) W^dagger"""

    ansatz: CartanAnsatz
    m: int
    epsilon: float
    loss: Optional[float] = None
    offset: float = 0.0

    def circuit(self, omit_final_rotation: bool = False) -> Circuit:
        a, m = self.ansatz, self.m
        circuit = Circuit(m + a.n, name="diagonalized-history")
        for wire in range(m):
            circuit.h(wire)
        gates = list(zip(a.letters, a.gate_angles))
        for letters, theta in gates:
            matrix, wires = _rotation_gate(letters, -theta)
            circuit.gate(f"W^dag:{letters}", matrix, [m + w for w in wires])
        for j in range(1, m + 1):
            for mu, coefficient in enumerate(a.beta):
                step = self.epsilon * 2 ** (j - 1)
                angle = coefficient * step
                # the identity part of H rides on the first rotation as a phase
                phase = np.exp(-1j * self.offset * step) if mu == 0 else 1.0
                circuit.controlled(
                    f"CRz(mu={mu},j={j})",
                    phase * np.diag([np.exp(-1j * angle), np.exp(1j * angle)]),
                    clock_wire(m, j),
                    [m + mu],
                )
        if not omit_final_rotation:
            for letters, theta in reversed(gates):
                matrix, wires = _rotation_gate(letters, theta)
                circuit.gate(f"W:{letters}", matrix, [m + w for w in wires])
        return circuit

    def build(self, psi0: StateVector, omit_final_rotation: bool = False) -> HistoryState:
        if psi0.num_qubits != self.ansatz.n:
            raise DimensionError(f"psi0 has {psi0.num_qubits} qubits, ansatz has {self.ansatz.n}")
        check_dense_cap(self.m + self.ansatz.n)
        circuit = self.circuit(omit_final_rotation)
        state = circuit.run(StateVector.basis(self.m, 0).tensor(psi0))
        N = 2**self.m
        return HistoryState(state, self.ansatz.n, self.m, self.epsilon, N * self.epsilon)


def diagonalized_history_builder(
    trained: Union[CartanAnsatz, TrainReport],
    m: int,
    epsilon: float,
    loss: Optional[float] = None,
    max_loss: float = 1e-8,
    offset: Optional[float] = None,
) -> DiagonalizedHistoryBuilder:
    """Refuses ansatz parameters whose training loss is above max_loss"""
    report = None
    if isinstance(trained, TrainReport):
        report = trained
        ansatz, loss = trained.best_params, trained.best_loss
        offset = trained.offset if offset is None else offset
    else:
        ansatz = trained
    if loss is not None and loss > max_loss:
        raise TrainingThresholdError(loss, max_loss, report)
    return DiagonalizedHistoryBuilder(ansatz, m, float(epsilon), loss, float(offset or 0.0))
