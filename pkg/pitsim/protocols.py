"""
Estimator circuits for time-averaged correlators, Loschmidt echoes and
history-state purities.

Every estimator runs in one of two modes. "exact" reads the exact measurement
probabilities of the simulated circuit; "sampled" draws binomial shot counts
from them with one Philox stream per circuit configuration ("cell").
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from pitsim.circuits import HADAMARD, Circuit
from pitsim.errors import ShotBudgetError
from pitsim.histstate import HistoryState, clock_wire, history_state_circuit
from pitsim.qcore import (
    DensityMatrix,
    PauliString,
    PauliSum,
    Spectrum,
    StateVector,
    as_dense,
    check_dense_cap,
    hermitian_eig,
    partial_trace,
)
from pitsim.schemas import EstimateRecord, EstimatorConfig

logger = logging.getLogger(__name__)

InitialState = Union[StateVector, DensityMatrix]

SHADOW_BATCHES = 10


def cell_rng(seed: int, cell: int) -> np.random.Generator:
    """Independent counter-based stream for one cell of an experiment"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(cell,))))


@dataclass(frozen=True)
class EstimateResult:
    value: complex
    stderr: float
    shots_used: int
    mode: str
    seed: Optional[int] = None

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be non-negative")
        if self.mode == "exact" and self.stderr != 0:
            raise ValueError("Exact results carry zero stderr")

    @property
    def real(self) -> float:
        return float(np.real(self.value))

    def to_record(self, protocol: str, params: Optional[dict] = None) -> dict:
        record = EstimateRecord(
            protocol=protocol,
            params=params or {},
            mode=self.mode,
            value_re=float(np.real(self.value)),
            value_im=float(np.imag(self.value)),
            stderr=self.stderr,
            shots=self.shots_used,
            seed=self.seed,
        )
        return record.model_dump()


@dataclass(frozen=True)
class ShadowSnapshot:
    """One randomized clock measurement: Clifford indices and outcome bits, wire order"""

    unitary_choice: Tuple[int, ...]
    outcome_bits: Tuple[int, ...]

    def __post_init__(self):
        if len(self.unitary_choice) != len(self.outcome_bits):
            raise ValueError("unitary_choice and outcome_bits must have equal length")


@dataclass(frozen=True)
class _Cell:
    """Contribution weight * <Z> of one circuit configuration, with P(outcome +1)"""

    weight: complex
    probability: float


def _mixture(rho0: InitialState) -> List[Tuple[float, StateVector]]:
    if isinstance(rho0, StateVector):
        return [(1.0, rho0)]
    return [(w, StateVector.from_amplitudes(v)) for w, v in rho0.mixture()]


def _pauli_terms(op: PauliSum) -> List[PauliString]:
    return [t for t in op.simplify().terms if t.coefficient != 0]


def _spectrum_of(h) -> Spectrum:
    return h if isinstance(h, Spectrum) else hermitian_eig(as_dense(h))


@lru_cache(maxsize=512)
def _pauli_matrix(letters: str) -> np.ndarray:
    return PauliString(letters).to_matrix()


def _zero_probability(
    circuit: Circuit, initial: Sequence[Tuple[float, StateVector]], wire: int
) -> float:
    """P(wire reads 0), averaged over an ensemble of input states"""
    total = 0.0
    for weight, state in initial:
        probs = circuit.run(state).probabilities().reshape([2] * circuit.num_qubits)
        total += weight * float(np.take(probs, 0, axis=wire).sum())
    return total


def _bell_plus_probability(state: StateVector, pairs: Sequence[Tuple[int, int]]) -> float:
    """P(prod (-1)^(a_j b_j) = +1) after CNOT(a->b), H(a) on every pair"""
    q = state.num_qubits
    index = np.arange(2**q)
    parity = np.zeros(2**q, dtype=np.int64)
    for a, b in pairs:
        parity ^= ((index >> (q - 1 - a)) & 1) & ((index >> (q - 1 - b)) & 1)
    return float(state.probabilities()[parity == 0].sum())


def bell_measurement(circuit: Circuit, pairs: Sequence[Tuple[int, int]]) -> Circuit:
    for a, b in pairs:
        circuit.cnot(a, b)
    for a, _ in pairs:
        circuit.h(a)
    return circuit


def _evaluate(tasks, threads: int) -> List[float]:
    if threads > 1:
        return Parallel(n_jobs=threads, prefer="threads")(delayed(fn)(*args) for fn, args in tasks)
    return [fn(*args) for fn, args in tasks]


def _combine(cells: List[_Cell], cfg: EstimatorConfig, offset: complex = 0.0) -> EstimateResult:
    """Sum weight * <Z> over cells in fixed order"""
    if cfg.mode == "exact":
        value = offset + sum(c.weight * (2.0 * c.probability - 1.0) for c in cells)
        return EstimateResult(value, 0.0, 0, "exact")

    shots = cfg.shots_per_cell
    value = offset
    variance = 0.0
    for index, cell in enumerate(cells):
        rng = cell_rng(cfg.seed, index)
        hits = rng.binomial(shots, min(1.0, max(0.0, cell.probability)))
        z = 2.0 * hits / shots - 1.0
        value += cell.weight * z
        variance += abs(cell.weight) ** 2 * (1.0 - z**2) / shots
    logger.debug("Sampled %d cells x %d shots (seed=%d)", len(cells), shots, cfg.seed)
    return EstimateResult(value, float(np.sqrt(variance)), shots * len(cells), "sampled", cfg.seed)


def discrete_time_average_f(
    h, rho0: InitialState, O1, O2, omega: float, N: int, epsilon: float
) -> complex:
    """(1/N) sum_t exp(-i omega eps t) Tr[rho0 U(eps t)^dagger O1 U(eps t) O2]"""
    spectrum = _spectrum_of(h)
    o1, o2 = as_dense(O1), as_dense(O2)
    rho = rho0.matrix if isinstance(rho0, DensityMatrix) else rho0.to_density_matrix().matrix
    total = 0.0 + 0.0j
    for t in range(N):
        u = spectrum.evolve(epsilon * t)
        total += np.exp(-1j * omega * epsilon * t) * np.trace(rho @ u.conj().T @ o1 @ u @ o2)
    return complex(total / N)


def sequential_f_circuit(
    spectrum: Spectrum, term_a: PauliString, term_b: PauliString, time: float, imaginary: bool
) -> Circuit:
    """Hadamard test of Re/Im <psi| U^dagger P_a U P_b |psi>; ancilla on the last wire"""
    n = term_a.n
    ancilla = n
    system = list(range(n))
    circuit = Circuit(n + 1, name="sequential-f")
    circuit.h(ancilla)
    if imaginary:
        circuit.s_dag(ancilla)
    circuit.controlled(f"C-{term_b.letters}", _pauli_matrix(term_b.letters), ancilla, system)
    circuit.gate("U(eps*t)", spectrum.evolve(time), system)
    circuit.controlled(f"C-{term_a.letters}", _pauli_matrix(term_a.letters), ancilla, system)
    circuit.h(ancilla)
    return circuit


def parallel_f_circuit(
    spectrum: Spectrum,
    term_a: PauliString,
    term_b: PauliString,
    omega: float,
    m: int,
    epsilon: float,
    imaginary: bool,
) -> Circuit:
    """Clock-parallel Hadamard test; wires are clock, system, ancilla"""
    n = term_a.n
    ancilla = m + n
    system = list(range(m, m + n))
    circuit = Circuit(m + n + 1, name="parallel-f")
    for wire in range(m):
        circuit.h(wire)
    circuit.h(ancilla)
    if imaginary:
        circuit.s_dag(ancilla)
    circuit.controlled(f"C-{term_b.letters}", _pauli_matrix(term_b.letters), ancilla, system)
    for j in range(1, m + 1):
        circuit.controlled(
            f"U(eps*2^{j - 1})", spectrum.evolve(epsilon * 2 ** (j - 1)), clock_wire(m, j), system
        )
    circuit.controlled(f"C-{term_a.letters}", _pauli_matrix(term_a.letters), ancilla, system)
    for j in range(1, m + 1):
        circuit.controlled_phase(ancilla, clock_wire(m, j), -omega * epsilon * 2 ** (j - 1))
    circuit.h(ancilla)
    return circuit


def estimate_F_sequential(
    h,
    rho0: InitialState,
    O1: PauliSum,
    O2: PauliSum,
    omega: float,
    N: int,
    epsilon: float,
    cfg: EstimatorConfig,
) -> EstimateResult:
    """One Hadamard-test circuit per (t, O1 term, O2 term, Re/Im)"""
    spectrum = _spectrum_of(h)
    n = O1.n
    check_dense_cap(n + 1)
    ensemble = [(w, s.tensor(StateVector.basis(1, 0))) for w, s in _mixture(rho0)]
    terms_1, terms_2 = _pauli_terms(O1), _pauli_terms(O2)

    layout, tasks = [], []
    for t in range(N):
        phase = np.exp(-1j * omega * epsilon * t) / N
        for a in terms_1:
            for b in terms_2:
                for imaginary in (False, True):
                    weight = phase * a.coefficient * b.coefficient * (1j if imaginary else 1.0)
                    circuit = sequential_f_circuit(spectrum, a, b, epsilon * t, imaginary)
                    layout.append(weight)
                    tasks.append((_zero_probability, (circuit, ensemble, n)))
    probabilities = _evaluate(tasks, cfg.threads)
    cells = [_Cell(w, p) for w, p in zip(layout, probabilities)]
    logger.debug("Sequential F: %d cells for N=%d", len(cells), N)
    return _combine(cells, cfg)


def estimate_F_parallel(
    h,
    rho0: InitialState,
    O1: PauliSum,
    O2: PauliSum,
    omega: float,
    m: int,
    epsilon: float,
    cfg: EstimatorConfig,
) -> EstimateResult:
    """One clock-parallel circuit per (O1 term, O2 term, Re/Im)"""
    spectrum = _spectrum_of(h)
    n = O1.n
    check_dense_cap(n + m + 1)
    clock = StateVector.basis(m, 0)
    ancilla = StateVector.basis(1, 0)
    ensemble = [(w, clock.tensor(s).tensor(ancilla)) for w, s in _mixture(rho0)]

    layout, tasks = [], []
    for a in _pauli_terms(O1):
        for b in _pauli_terms(O2):
            for imaginary in (False, True):
                weight = a.coefficient * b.coefficient * (1j if imaginary else 1.0)
                circuit = parallel_f_circuit(spectrum, a, b, omega, m, epsilon, imaginary)
                layout.append(weight)
                tasks.append((_zero_probability, (circuit, ensemble, m + n)))
    probabilities = _evaluate(tasks, cfg.threads)
    cells = [_Cell(w, p) for w, p in zip(layout, probabilities)]
    return _combine(cells, cfg)


def _loschmidt_overlap_probability(spectrum: Spectrum, psi0: StateVector, time: float) -> float:
    n = psi0.num_qubits
    circuit = Circuit(2 * n, name="sequential-loschmidt")
    circuit.gate("U(eps*t)", spectrum.evolve(time), list(range(n, 2 * n)))
    pairs = [(j, n + j) for j in range(n)]
    bell_measurement(circuit, pairs)
    return _bell_plus_probability(circuit.run(psi0.tensor(psi0)), pairs)


def estimate_loschmidt_sequential(
    h, psi0: StateVector, N: int, epsilon: float, cfg: EstimatorConfig
) -> EstimateResult:
    """Swap-test overlap of psi0 with U(eps t) psi0 for t >= 1; the t=0 term is 1"""
    spectrum = _spectrum_of(h)
    check_dense_cap(2 * psi0.num_qubits)
    tasks = [
        (_loschmidt_overlap_probability, (spectrum, psi0, epsilon * t)) for t in range(1, N)
    ]
    probabilities = _evaluate(tasks, cfg.threads)
    cells = [_Cell(1.0 / N, p) for p in probabilities]
    result = _combine(cells, cfg, offset=1.0 / N)
    return EstimateResult(result.real, result.stderr, result.shots_used, result.mode, result.seed)


def loschmidt_parallel_circuit(spectrum: Spectrum, n: int, m: int, epsilon: float) -> Circuit:
    """History-state preparation on clock+system, then Bell pairs between system and copy"""
    circuit = Circuit(m + 2 * n, name="parallel-loschmidt")
    circuit.extend(history_state_circuit(spectrum, n, m, epsilon))
    return bell_measurement(circuit, [(m + j, m + n + j) for j in range(n)])


def estimate_loschmidt_parallel(
    h, psi0: StateVector, m: int, epsilon: float, cfg: EstimatorConfig
) -> EstimateResult:
    """Tr[rho_S |psi0><psi0|] from one history state and one fresh copy of psi0"""
    spectrum = _spectrum_of(h)
    n = psi0.num_qubits
    check_dense_cap(2 * n + m)
    circuit = loschmidt_parallel_circuit(spectrum, n, m, epsilon)
    final = circuit.run(StateVector.basis(m, 0).tensor(psi0).tensor(psi0))
    probability = _bell_plus_probability(final, [(m + j, m + n + j) for j in range(n)])
    result = _combine([_Cell(1.0, probability)], cfg)
    return EstimateResult(result.real, result.stderr, result.shots_used, result.mode, result.seed)


def estimate_purity_overlap(Psi: HistoryState, cfg: EstimatorConfig) -> EstimateResult:
    """Tr[rho_T^2] from two copies of the history state, Bell pairs across the clocks"""
    width = Psi.m + Psi.n
    check_dense_cap(2 * width)
    pairs = [(j, width + j) for j in range(Psi.m)]
    circuit = bell_measurement(Circuit(2 * width, name="purity-overlap"), pairs)
    final = circuit.run(Psi.state.tensor(Psi.state))
    result = _combine([_Cell(1.0, _bell_plus_probability(final, pairs))], cfg)
    return EstimateResult(result.real, result.stderr, result.shots_used, result.mode, result.seed)


def _canonical_key(matrix: np.ndarray) -> tuple:
    flat = matrix.ravel()
    pivot = flat[np.argmax(np.abs(flat) > 1e-9)]
    normalized = flat * (abs(pivot) / pivot)
    return tuple(np.round(normalized.real, 8) + 0.0) + tuple(np.round(normalized.imag, 8) + 0.0)


@lru_cache(maxsize=1)
def single_qubit_cliffords() -> Tuple[np.ndarray, ...]:
    """The 24 single-qubit Cliffords modulo phase, generated from H and S"""
    phase_gate = np.diag([1.0, 1j])
    found = [np.eye(2, dtype=complex)]
    seen = {_canonical_key(found[0])}
    frontier = list(found)
    while frontier:
        grown = []
        for element in frontier:
            for generator in (HADAMARD, phase_gate):
                candidate = generator @ element
                key = _canonical_key(candidate)
                if key not in seen:
                    seen.add(key)
                    found.append(candidate)
                    grown.append(candidate)
        frontier = grown
    return tuple(found)


def sample_shadow_snapshots(
    rho_t: DensityMatrix, K: int, rng: np.random.Generator
) -> List[ShadowSnapshot]:
    """Random Clifford on every clock qubit, then a computational-basis readout"""
    cliffords = single_qubit_cliffords()
    m = rho_t.num_qubits
    snapshots = []
    for _ in range(K):
        choice = rng.integers(len(cliffords), size=m)
        rotation = np.ones((1, 1), dtype=complex)
        for index in choice:
            rotation = np.kron(rotation, cliffords[index])
        rotated = np.einsum("ij,jk,ik->i", rotation, rho_t.matrix, rotation.conj())
        probs = np.clip(np.real(rotated), 0.0, None)
        outcome = int(rng.choice(probs.shape[0], p=probs / probs.sum()))
        bits = tuple((outcome >> (m - 1 - w)) & 1 for w in range(m))
        snapshots.append(ShadowSnapshot(tuple(int(c) for c in choice), bits))
    return snapshots


def shadow_pair_matrix(snapshots: Sequence[ShadowSnapshot]) -> np.ndarray:
    """T_ij = Tr[rho_i rho_j] for the inverted snapshots rho = (x)(3 U^dagger|b><b|U - I)"""
    cliffords = single_qubit_cliffords()
    K = len(snapshots)
    m = len(snapshots[0].unitary_choice)
    pair = np.ones((K, K))
    for wire in range(m):
        vectors = np.array(
            [cliffords[s.unitary_choice[wire]][s.outcome_bits[wire], :].conj() for s in snapshots]
        )
        overlaps = np.abs(vectors.conj() @ vectors.T) ** 2
        pair *= 9.0 * overlaps - 4.0
    return pair


def _u_statistic(pair: np.ndarray) -> float:
    K = pair.shape[0]
    return float((pair.sum() - np.trace(pair)) / (K * (K - 1)))


def _bootstrap_stderr(pair: np.ndarray, rng: np.random.Generator, resamples: int) -> float:
    """Resample snapshots with replacement, never pairing a snapshot with its own copy"""
    K = pair.shape[0]
    off_diagonal = pair.copy()
    np.fill_diagonal(off_diagonal, 0.0)
    estimates = []
    for _ in range(resamples):
        counts = rng.multinomial(K, np.full(K, 1.0 / K)).astype(float)
        pairs = K**2 - float(counts @ counts)
        if pairs <= 0:
            continue
        estimates.append(float(counts @ off_diagonal @ counts) / pairs)
    return float(np.std(estimates, ddof=1)) if len(estimates) > 1 else 0.0


def shadow_purity(
    snapshots: Sequence[ShadowSnapshot],
    rng: np.random.Generator,
    method: str = "u_statistic",
    bootstrap: int = 200,
) -> Tuple[float, float]:
    """(estimate, stderr) of Tr[rho^2] from randomized snapshots"""
    pair = shadow_pair_matrix(snapshots)
    if method == "u_statistic":
        return _u_statistic(pair), _bootstrap_stderr(pair, rng, bootstrap)
    if method == "median_of_means":
        batches = np.array_split(np.arange(pair.shape[0]), SHADOW_BATCHES)
        means = np.array([_u_statistic(pair[np.ix_(b, b)]) for b in batches])
        spread = np.sqrt(np.pi / 2) * np.std(means, ddof=1) / np.sqrt(len(means))
        return float(np.median(means)), float(spread)
    raise ValueError(f"Unknown shadow estimator {method!r}")


def estimate_purity_shadows(
    Psi: HistoryState,
    K: int,
    seed: int,
    method: str = "u_statistic",
    bootstrap: int = 200,
) -> EstimateResult:
    """Tr[rho_T^2] from K randomized clock measurements"""
    if K < 2:
        raise ShotBudgetError(f"Shadow purity needs at least 2 snapshots, got {K}")
    if method == "median_of_means" and K < 2 * SHADOW_BATCHES:
        raise ShotBudgetError(f"Median of means needs K >= {2 * SHADOW_BATCHES}, got {K}")
    rho_t = partial_trace(Psi.state, Psi.split, keep="A")
    snapshots = sample_shadow_snapshots(rho_t, K, cell_rng(seed, 0))
    value, stderr = shadow_purity(snapshots, cell_rng(seed, 1), method, bootstrap)
    logger.debug("Shadow purity %.6f +/- %.6f from K=%d (seed=%d)", value, stderr, K, seed)
    return EstimateResult(value, stderr, K, "sampled", seed)
