"""
Discrete history states: construction, conditioning, reductions and the
system-time entanglement relations they satisfy.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from pitsim.circuits import Circuit
from pitsim.errors import ClockIndexError, NumericValidationError
from pitsim.hamiltonians import energy_components, eigenvalue_clusters, temporal_fluctuations
from pitsim.qcore import (
    DensityMatrix,
    Spectrum,
    StateVector,
    as_dense,
    check_dense_cap,
    hermitian_eig,
    partial_trace,
    purity,
)
from pitsim.settings import Settings

logger = logging.getLogger(__name__)

CIRCUIT_TOL = 1e-10


@dataclass(frozen=True)
class HistoryState:
    """(1/sqrt N) sum_t |t> (x) U(eps t)|psi0>, clock register first"""

    state: StateVector
    n: int
    m: int
    epsilon: float
    T: float

    def __post_init__(self):
        if self.state.num_qubits != self.n + self.m:
            raise ValueError(
                f"State has {self.state.num_qubits} qubits, expected m+n = {self.m + self.n}"
            )
        if abs(self.N * self.epsilon - self.T) > 1e-12 * max(1.0, abs(self.T)):
            raise ValueError(f"N*epsilon = {self.N * self.epsilon} differs from T = {self.T}")
        blocks = self.state.amplitudes.reshape(self.N, 2**self.n)
        norms = np.sum(np.abs(blocks) ** 2, axis=1)
        if np.max(np.abs(norms - 1.0 / self.N)) > 1e-12:
            raise ValueError("Conditioning on some clock value does not give a normalized state")

    @property
    def N(self) -> int:
        return 2**self.m

    @property
    def split(self) -> Tuple[int, int]:
        return self.m, self.n


class MajorizationReport(NamedTuple):
    spectrum_rho_s: np.ndarray
    spectrum_rho_bar: np.ndarray
    holds: bool
    max_violation: float


class LoschmidtBound(NamedTuple):
    E2: float
    Lbar: float
    slack: float


class FluctuationBound(NamedTuple):
    sigma2: float
    bound: float
    delta2: float
    Lbar: float
    purity_s: float


def _spectrum_of(h) -> Spectrum:
    return h if isinstance(h, Spectrum) else hermitian_eig(h)


def _evolved_blocks(spectrum: Spectrum, psi0: StateVector, N: int, epsilon: float) -> np.ndarray:
    """Row t holds U(eps t)|psi0>"""
    coords = spectrum.eigenvectors.conj().T @ psi0.amplitudes
    times = epsilon * np.arange(N)
    phases = np.exp(-1j * np.outer(times, spectrum.eigenvalues))
    return (phases * coords) @ spectrum.eigenvectors.T


def clock_wire(m: int, j: int) -> int:
    """Wire of the clock qubit with binary weight 2^(j-1)"""
    return m - j


def history_state_circuit(h, n: int, m: int, epsilon: float) -> Circuit:
    """Hadamards on the clock, then U(eps 2^(j-1)) controlled by clock qubit j"""
    spectrum = _spectrum_of(h)
    circuit = Circuit(m + n, name="history-state")
    system = list(range(m, m + n))
    for wire in range(m):
        circuit.h(wire)
    for j in range(1, m + 1):
        circuit.controlled(
            f"U(eps*2^{j - 1})", spectrum.evolve(epsilon * 2 ** (j - 1)), clock_wire(m, j), system
        )
    return circuit


def build_history_state(
    h,
    psi0: StateVector,
    m: int,
    epsilon: float,
    method: str = "formula",
    verify: bool = False,
    cap: Optional[int] = None,
) -> HistoryState:
    """
    Discrete history state of psi0 under h over N = 2^m times spaced by epsilon.

    method="formula" stacks U(eps t)|psi0> directly; method="circuit" runs the
    controlled-power circuit. verify=True cross-checks the two.
    """
    n = psi0.num_qubits
    check_dense_cap(n + m, cap)
    spectrum = _spectrum_of(h)
    N = 2**m
    if method == "formula":
        blocks = _evolved_blocks(spectrum, psi0, N, epsilon)
        state = StateVector(blocks.ravel() / np.sqrt(N))
    elif method == "circuit":
        circuit = history_state_circuit(spectrum, n, m, epsilon)
        state = circuit.run(StateVector.basis(m, 0).tensor(psi0))
    else:
        raise ValueError(f"Unknown construction method {method!r}")

    if verify:
        reference = _evolved_blocks(spectrum, psi0, N, epsilon).ravel() / np.sqrt(N)
        deviation = float(np.max(np.abs(state.amplitudes - reference)))
        if deviation > CIRCUIT_TOL:
            raise NumericValidationError(
                f"History state ({method}) deviates from the direct formula by {deviation:.3e}"
            )
    logger.debug("Built history state n=%d m=%d eps=%g via %s", n, m, epsilon, method)
    return HistoryState(state, n, m, float(epsilon), float(N * epsilon))


def condition_on_time(Psi: HistoryState, t: int) -> StateVector:
    """Normalized system state found when the clock reads t"""
    if not 0 <= t < Psi.N:
        raise ClockIndexError(f"Clock value {t} outside 0..{Psi.N - 1}")
    block = Psi.state.amplitudes.reshape(Psi.N, 2**Psi.n)[t]
    return StateVector.from_amplitudes(block)


def reduced_states(Psi: HistoryState) -> Tuple[DensityMatrix, DensityMatrix]:
    """(rho_T, rho_S)"""
    rho_t = partial_trace(Psi.state, Psi.split, keep="A")
    rho_s = partial_trace(Psi.state, Psi.split, keep="B")
    return rho_t, rho_s


def linear_entropy(Psi: HistoryState) -> float:
    """E2 = 1 - Tr[rho_T^2]"""
    rho_t = partial_trace(Psi.state, Psi.split, keep="A")
    return 1.0 - purity(rho_t)


def check_majorization(Psi: HistoryState, h, tol: float = 1e-12) -> MajorizationReport:
    """Check that the dephased state is majorized by rho_S"""
    _, rho_s = reduced_states(Psi)
    psi0 = condition_on_time(Psi, 0)
    components = energy_components(_spectrum_of(h), psi0.amplitudes)
    dim = 2**Psi.n
    spectrum_s = np.clip(rho_s.eigenvalues(), 0.0, None)
    spectrum_bar = np.zeros(dim)
    spectrum_bar[: components.count] = np.sort(components.weights)[::-1]
    gaps = np.cumsum(spectrum_bar) - np.cumsum(spectrum_s)
    violation = max(0.0, float(gaps.max()))
    return MajorizationReport(spectrum_s, spectrum_bar, violation <= tol, violation)


def entanglement_loschmidt_bound(Psi: HistoryState, h, psi0: StateVector) -> LoschmidtBound:
    """E2 <= 1 - Lbar, reported with its slack"""
    E2 = linear_entropy(Psi)
    Lbar = energy_components(_spectrum_of(h), psi0.amplitudes).loschmidt_bar()
    return LoschmidtBound(E2, Lbar, (1.0 - Lbar) - E2)


def fluctuation_bound(Psi: HistoryState, h, psi0: StateVector, O) -> FluctuationBound:
    """sigma2_O against Delta2_O * (1 - E2) = Delta2_O * Tr[rho_S^2]"""
    observable = as_dense(O)
    sigma2, delta2, Lbar = temporal_fluctuations(_spectrum_of(h), psi0, observable)
    purity_s = 1.0 - linear_entropy(Psi)
    return FluctuationBound(sigma2, delta2 * purity_s, delta2, Lbar, purity_s)


def dephasing_factors(energies: np.ndarray, N: int, epsilon: float) -> np.ndarray:
    """
    Delta_kk' = (1/N) sum_t exp(-i (E_k - E_k') eps t), in closed geometric form.

    Entries whose phase step is a multiple of 2 pi equal 1.
    """
    gaps = energies[:, None] - energies[None, :]
    step = np.exp(-1j * gaps * epsilon)
    total = np.exp(-1j * gaps * epsilon * N)
    singular = np.abs(1.0 - step) < 1e-12
    safe = np.where(singular, 1.0, 1.0 - step)
    factors = np.where(singular, 1.0 + 0j, (1.0 - total) / (N * safe))
    return factors


def dephasing_envelope(energies: np.ndarray, N: int, epsilon: float) -> np.ndarray:
    """|Delta_kk'|^2 <= 1 / (N^2 sin^2(dE eps / 2)), decreasing in T = N eps"""
    gaps = energies[:, None] - energies[None, :]
    denominator = (N * np.sin(gaps * epsilon / 2.0)) ** 2
    with np.errstate(divide="ignore"):
        return np.where(denominator > 0, np.minimum(1.0, 1.0 / denominator), 1.0)


def discretized_average_state(h, psi0: StateVector, N: int, epsilon: float) -> DensityMatrix:
    """rho~ = sum_kk' Delta_kk' P_k rho0 P_k' (the N-point time average of the state)"""
    spectrum = _spectrum_of(h)
    components = energy_components(spectrum, psi0.amplitudes)
    factors = dephasing_factors(components.energies, N, epsilon)
    amplitudes = components.vectors * np.sqrt(components.weights)
    rho = amplitudes @ factors @ amplitudes.conj().T
    return DensityMatrix((rho + rho.conj().T) / 2)


def coherence_weight(rho: DensityMatrix, h) -> float:
    """sum over k != k' of ||P_k rho P_k'||_F^2"""
    spectrum = _spectrum_of(h)
    clusters = eigenvalue_clusters(spectrum.eigenvalues, Settings.degeneracy_tol(spectrum.scale))
    rotated = spectrum.eigenvectors.conj().T @ rho.matrix @ spectrum.eigenvectors
    labels = np.empty(spectrum.dim, dtype=int)
    for k, members in enumerate(clusters):
        labels[members] = k
    off_block = labels[:, None] != labels[None, :]
    return float(np.sum(np.abs(rotated[off_block]) ** 2))


def coherence_envelope(h, psi0: StateVector, N: int, epsilon: float) -> float:
    """Upper envelope of coherence_weight(rho_S) at window T = N eps"""
    components = energy_components(_spectrum_of(h), psi0.amplitudes)
    envelope = dephasing_envelope(components.energies, N, epsilon)
    np.fill_diagonal(envelope, 0.0)
    return float(components.weights @ envelope @ components.weights)
