"""
Dense linear-algebra core: Pauli strings, states, density matrices and spectra.

Wire 0 is the most significant qubit of every register. Registers that hold a
clock and a system put the clock block first, so a joint basis index reads
t * 2**n + s.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from pitsim.errors import DenseCapError, DimensionError, HermiticityError, WiringError
from pitsim.settings import Settings

logger = logging.getLogger(__name__)

PAULI_LETTERS = "IXYZ"

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# (left, right) -> (phase, product)
_LETTER_PRODUCTS = {
    ("X", "Y"): (1j, "Z"),
    ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("X", "Z"): (-1j, "Y"),
}


def _bit_parity(values: np.ndarray, num_bits: int) -> np.ndarray:
    parity = np.zeros_like(values)
    for k in range(num_bits):
        parity ^= (values >> k) & 1
    return parity


@lru_cache(maxsize=4096)
def pauli_monomial(letters: str) -> Tuple[int, np.ndarray]:
    """
    Monomial form of a unit Pauli string: P|b> = phase[b] |b ^ flip_mask>.

    Returns the flip mask and the phase for every input basis index.
    """
    n = len(letters)
    flip_mask = 0
    sign_mask = 0
    num_y = 0
    for wire, letter in enumerate(letters):
        bit = 1 << (n - 1 - wire)
        if letter in "XY":
            flip_mask |= bit
        if letter in "YZ":
            sign_mask |= bit
        if letter == "Y":
            num_y += 1
    index = np.arange(2**n, dtype=np.int64)
    signs = 1 - 2 * _bit_parity(index & sign_mask, n)
    phases = (1j**num_y) * signs.astype(complex)
    phases.setflags(write=False)
    return flip_mask, phases


def check_dense_cap(num_qubits: int, cap: Optional[int] = None) -> None:
    """Raise DenseCapError when a register is too large for dense simulation"""
    limit = Settings.dense_cap(cap)
    if num_qubits > limit:
        raise DenseCapError(num_qubits, limit)


def _check_wires(num_qubits: int, wires: Sequence[int]) -> None:
    if len(set(wires)) != len(wires):
        raise WiringError(f"Wires {tuple(wires)} overlap")
    for wire in wires:
        if not 0 <= wire < num_qubits:
            raise WiringError(f"Wire {wire} outside register of {num_qubits} qubits")


def _qubit_count(dim: int) -> int:
    q = int(dim).bit_length() - 1
    if dim < 1 or 2**q != dim:
        raise DimensionError(f"Dimension {dim} is not a power of two")
    return q


@dataclass(frozen=True)
class PauliString:
    """Weighted tensor product of single-qubit Pauli matrices"""

    letters: str
    coefficient: complex = 1.0

    def __post_init__(self):
        letters = "".join(self.letters).upper()
        if not letters or any(c not in PAULI_LETTERS for c in letters):
            raise ValueError(f"Invalid Pauli letters: {self.letters!r}")
        coefficient = complex(self.coefficient)
        if not np.isfinite(coefficient.real) or not np.isfinite(coefficient.imag):
            raise ValueError(f"Pauli coefficient must be finite, got {coefficient}")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "coefficient", coefficient)

    @classmethod
    def on_sites(cls, n: int, sites: Dict[int, str], coefficient: complex = 1.0):
        """Build from a {wire: letter} map, identity elsewhere"""
        letters = ["I"] * n
        for wire, letter in sites.items():
            letters[wire] = letter
        return cls("".join(letters), coefficient)

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return set(self.letters) <= {"I"}

    @property
    def symplectic(self) -> Tuple[int, int]:
        """(x, z) bit masks, phase dropped"""
        x = z = 0
        for wire, letter in enumerate(self.letters):
            bit = 1 << (self.n - 1 - wire)
            if letter in "XY":
                x |= bit
            if letter in "YZ":
                z |= bit
        return x, z

    def commutes_with(self, other: "PauliString") -> bool:
        x1, z1 = self.symplectic
        x2, z2 = other.symplectic
        return bin((x1 & z2) ^ (z1 & x2)).count("1") % 2 == 0

    def multiply(self, other: "PauliString") -> "PauliString":
        """Operator product self * other with the phase folded into the coefficient"""
        if other.n != self.n:
            raise DimensionError(f"Cannot multiply {self.n}- and {other.n}-qubit strings")
        phase = self.coefficient * other.coefficient
        letters = []
        for a, b in zip(self.letters, other.letters):
            if a == "I":
                letters.append(b)
            elif b == "I":
                letters.append(a)
            elif a == b:
                letters.append("I")
            else:
                factor, product = _LETTER_PRODUCTS[(a, b)]
                phase *= factor
                letters.append(product)
        return PauliString("".join(letters), phase)

    def unit(self) -> "PauliString":
        return PauliString(self.letters, 1.0)

    def to_matrix(self, cap: Optional[int] = None) -> np.ndarray:
        check_dense_cap(self.n, cap)
        flip_mask, phases = pauli_monomial(self.letters)
        index = np.arange(2**self.n)
        matrix = np.zeros((2**self.n, 2**self.n), dtype=complex)
        matrix[index ^ flip_mask, index] = self.coefficient * phases
        return matrix

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        """Action on a raw amplitude vector without building the matrix"""
        flip_mask, phases = pauli_monomial(self.letters)
        out = np.empty_like(amplitudes, dtype=complex)
        out[np.arange(amplitudes.shape[0]) ^ flip_mask] = self.coefficient * phases * amplitudes
        return out

    def __str__(self) -> str:
        return f"{self.coefficient:g}*{self.letters}"


@dataclass(frozen=True)
class PauliSum:
    """Linear combination of Pauli strings on a common register"""

    terms: Tuple[PauliString, ...]
    n: int

    def __post_init__(self):
        terms = tuple(self.terms)
        if self.n < 1:
            raise DimensionError("PauliSum needs at least one qubit")
        for term in terms:
            if term.n != self.n:
                raise DimensionError(
                    f"Term {term.letters} acts on {term.n} qubits, expected {self.n}"
                )
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_strings(cls, n: int, pairs: Iterable[Tuple[complex, str]]) -> "PauliSum":
        return cls(tuple(PauliString(letters, coeff) for coeff, letters in pairs), n)

    @classmethod
    def identity(cls, n: int, coefficient: complex = 1.0) -> "PauliSum":
        return cls((PauliString("I" * n, coefficient),), n)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n != self.n:
            raise DimensionError("Cannot add PauliSums on different registers")
        return PauliSum(self.terms + other.terms, self.n)

    def scaled(self, factor: complex) -> "PauliSum":
        return PauliSum(
            tuple(PauliString(t.letters, t.coefficient * factor) for t in self.terms), self.n
        )

    def simplify(self, atol: float = 0.0) -> "PauliSum":
        """Merge repeated strings and drop terms with |coefficient| <= atol"""
        merged: Dict[str, complex] = {}
        for term in self.terms:
            merged[term.letters] = merged.get(term.letters, 0.0) + term.coefficient
        terms = tuple(
            PauliString(letters, coeff)
            for letters, coeff in merged.items()
            if abs(coeff) > atol
        )
        return PauliSum(terms, self.n)

    def is_hermitian(self, tol: Optional[float] = None) -> bool:
        tol = Settings.hermitian_tol(tol)
        return all(abs(t.coefficient.imag) <= tol for t in self.simplify().terms)

    def norm_sq(self) -> float:
        """Sum of |a_i|^2 over distinct strings, i.e. ||H||_HS^2 / 2^n"""
        return float(sum(abs(t.coefficient) ** 2 for t in self.simplify().terms))

    def to_matrix(self, cap: Optional[int] = None) -> np.ndarray:
        return pauli_sum_to_matrix(self, cap=cap)

    def __len__(self) -> int:
        return len(self.terms)


def pauli_sum_to_matrix(h: PauliSum, cap: Optional[int] = None) -> np.ndarray:
    """Dense 2^n x 2^n matrix of a PauliSum"""
    check_dense_cap(h.n, cap)
    dim = 2**h.n
    index = np.arange(dim)
    matrix = np.zeros((dim, dim), dtype=complex)
    for term in h.terms:
        flip_mask, phases = pauli_monomial(term.letters)
        matrix[index ^ flip_mask, index] += term.coefficient * phases
    return matrix


def as_dense(h: Union[PauliSum, np.ndarray], cap: Optional[int] = None) -> np.ndarray:
    """Dense complex matrix from either a PauliSum or an array"""
    if isinstance(h, PauliSum):
        return pauli_sum_to_matrix(h, cap=cap)
    matrix = np.asarray(h, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"Expected a square matrix, got shape {matrix.shape}")
    return matrix


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state on q qubits"""

    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex).ravel()
        _qubit_count(amplitudes.shape[0])
        norm_sq = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm_sq - 1.0) > Settings.NORM_TOL:
            raise ValueError(f"State is not normalized: ||psi||^2 = {norm_sq:.15f}")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = True) -> "StateVector":
        amplitudes = np.asarray(amplitudes, dtype=complex).ravel()
        if normalize:
            norm = np.linalg.norm(amplitudes)
            if norm == 0:
                raise ValueError("Cannot normalize the zero vector")
            amplitudes = amplitudes / norm
        return cls(amplitudes)

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0) -> "StateVector":
        amplitudes = np.zeros(2**num_qubits, dtype=complex)
        amplitudes[index] = 1.0
        return cls(amplitudes)

    @classmethod
    def from_label(cls, label: str) -> "StateVector":
        """Product state from characters in {0, 1, +, -}"""
        single = {
            "0": np.array([1, 0], dtype=complex),
            "1": np.array([0, 1], dtype=complex),
            "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
            "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
        }
        amplitudes = np.ones(1, dtype=complex)
        unknown = sorted(set(label) - set(single))
        if unknown:
            raise ValueError(f"Unknown state label characters {unknown}; use 0, 1, + or -")
        for char in label:
            amplitudes = np.kron(amplitudes, single[char])
        return cls(amplitudes)

    @property
    def num_qubits(self) -> int:
        return _qubit_count(self.amplitudes.shape[0])

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(np.kron(self.amplitudes, other.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator"""

    matrix: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"Density matrix must be square, got {matrix.shape}")
        _qubit_count(matrix.shape[0])
        if self.validate:
            deviation = float(np.max(np.abs(matrix - matrix.conj().T)))
            if deviation > Settings.NORM_TOL:
                raise HermiticityError(deviation, Settings.NORM_TOL)
            trace = complex(np.trace(matrix))
            if abs(trace - 1.0) > Settings.NORM_TOL:
                raise ValueError(f"Density matrix trace is {trace}, expected 1")
            floor = float(np.linalg.eigvalsh(matrix).min())
            if floor < Settings.PSD_FLOOR:
                raise ValueError(f"Density matrix has eigenvalue {floor:.3e} below zero")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> "DensityMatrix":
        dim = 2**num_qubits
        return cls(np.eye(dim, dtype=complex) / dim)

    @property
    def num_qubits(self) -> int:
        return _qubit_count(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Descending spectrum"""
        return np.linalg.eigvalsh(self.matrix)[::-1]

    def mixture(self, floor: float = 1e-14) -> List[Tuple[float, np.ndarray]]:
        """Eigen-decomposition as (weight, pure state) pairs with weight above floor"""
        weights, vectors = np.linalg.eigh(self.matrix)
        return [(float(w), vectors[:, k]) for k, w in enumerate(weights) if w > floor]


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition with eigenvalues in descending order"""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def scale(self) -> float:
        """Spectral norm, the scale for relative tolerances"""
        return float(np.max(np.abs(self.eigenvalues))) if self.dim else 0.0

    def evolve(self, t: float) -> np.ndarray:
        """V diag(exp(-i lambda t)) V^dagger"""
        phases = np.exp(-1j * self.eigenvalues * t)
        return (self.eigenvectors * phases) @ self.eigenvectors.conj().T

    def evolve_vector(self, vector: np.ndarray, t: float) -> np.ndarray:
        coords = self.eigenvectors.conj().T @ vector
        return self.eigenvectors @ (np.exp(-1j * self.eigenvalues * t) * coords)

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T


def hermitian_eig(h: Union[PauliSum, np.ndarray], tol: Optional[float] = None) -> Spectrum:
    """Hermitian eigendecomposition, eigenvalues descending"""
    matrix = as_dense(h)
    tol = Settings.hermitian_tol(tol)
    deviation = float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
    if deviation > tol:
        raise HermiticityError(deviation, tol)
    symmetric = (matrix + matrix.conj().T) / 2
    eigenvalues, eigenvectors = scipy.linalg.eigh(symmetric)
    logger.debug("Diagonalized %dx%d matrix", *matrix.shape)
    return Spectrum(eigenvalues[::-1].copy(), eigenvectors[:, ::-1].copy())


def propagator(h: Union[PauliSum, np.ndarray, Spectrum], t: float) -> np.ndarray:
    """U(t) = exp(-iHt)"""
    spectrum = h if isinstance(h, Spectrum) else hermitian_eig(h)
    return spectrum.evolve(t)


def partial_trace(
    state: Union[StateVector, DensityMatrix], split: Tuple[int, int], keep: str = "A"
) -> DensityMatrix:
    """
    Reduce a bipartite state on q_A + q_B qubits (block A first).

    keep="A" traces out B and vice versa.
    """
    q_a, q_b = split
    if keep not in ("A", "B"):
        raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")
    if q_a < 0 or q_b < 0 or q_a + q_b != state.num_qubits:
        raise DimensionError(
            f"Split {split} does not match a {state.num_qubits}-qubit state"
        )
    dim_a, dim_b = 2**q_a, 2**q_b
    if isinstance(state, StateVector):
        psi = state.amplitudes.reshape(dim_a, dim_b)
        if keep == "A":
            reduced = psi @ psi.conj().T
        else:
            reduced = psi.T @ psi.conj()
    else:
        rho = state.matrix.reshape(dim_a, dim_b, dim_a, dim_b)
        if keep == "A":
            reduced = np.einsum("ajbj->ab", rho)
        else:
            reduced = np.einsum("iaib->ab", rho)
    reduced = (reduced + reduced.conj().T) / 2
    return DensityMatrix(reduced)


def purity(rho: DensityMatrix) -> float:
    """Tr[rho^2]"""
    return float(np.vdot(rho.matrix, rho.matrix).real)


def _apply_on_axes(tensor: np.ndarray, unitary: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    moved = np.moveaxis(tensor, list(axes), list(range(k)))
    shape = moved.shape
    updated = (unitary @ moved.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(updated, list(range(k)), list(axes))


def _checked_unitary(unitary: np.ndarray, k: int) -> np.ndarray:
    unitary = np.asarray(unitary, dtype=complex)
    if unitary.shape != (2**k, 2**k):
        raise DimensionError(f"Gate of shape {unitary.shape} does not act on {k} qubits")
    return unitary


def apply_unitary(state: StateVector, unitary: np.ndarray, targets: Sequence[int]) -> StateVector:
    """Apply a k-qubit gate to the listed wires (first wire most significant)"""
    q = state.num_qubits
    targets = list(targets)
    _check_wires(q, targets)
    unitary = _checked_unitary(unitary, len(targets))
    tensor = state.amplitudes.reshape([2] * q)
    return StateVector(_apply_on_axes(tensor, unitary, targets).ravel())


def apply_controlled(
    state: StateVector, control_qubit: int, target_unitary: np.ndarray, target_block: Sequence[int]
) -> StateVector:
    """Apply target_unitary on target_block in the branch where control_qubit is 1"""
    q = state.num_qubits
    targets = list(target_block)
    if control_qubit in targets:
        raise WiringError(f"Control wire {control_qubit} lies inside target block {targets}")
    _check_wires(q, targets + [control_qubit])
    unitary = _checked_unitary(target_unitary, len(targets))
    tensor = state.amplitudes.reshape([2] * q).copy()
    selector = [slice(None)] * q
    selector[control_qubit] = 1
    selector = tuple(selector)
    axes = [t if t < control_qubit else t - 1 for t in targets]
    tensor[selector] = _apply_on_axes(tensor[selector], unitary, axes)
    return StateVector(tensor.ravel())


def expectation(state: StateVector, op: Union[PauliSum, np.ndarray]) -> complex:
    if isinstance(op, PauliSum):
        image = sum(term.apply(state.amplitudes) for term in op.terms)
    else:
        image = as_dense(op) @ state.amplitudes
    return complex(np.vdot(state.amplitudes, image))


def overlap(a: StateVector, b: StateVector) -> complex:
    """<a|b>"""
    if a.dim != b.dim:
        raise DimensionError(f"Cannot overlap states of dimension {a.dim} and {b.dim}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity_up_to_phase(a: StateVector, b: StateVector) -> float:
    """|<a|b>|, equal to 1 iff the states agree up to a global phase"""
    return abs(overlap(a, b))


def schmidt_spectrum(state: StateVector, q_a: int) -> np.ndarray:
    """Descending Schmidt probabilities p_l across the q_a | rest cut"""
    q_b = state.num_qubits - q_a
    if q_a < 0 or q_b < 0:
        raise DimensionError(f"Cannot cut a {state.num_qubits}-qubit state after {q_a} qubits")
    singular = np.linalg.svd(state.amplitudes.reshape(2**q_a, 2**q_b), compute_uv=False)
    return singular**2


def random_state(num_qubits: int, rng: np.random.Generator) -> StateVector:
    dim = 2**num_qubits
    return StateVector.from_amplitudes(rng.normal(size=dim) + 1j * rng.normal(size=dim))


def random_hermitian(num_qubits: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    dim = 2**num_qubits
    ginibre = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (ginibre + ginibre.conj().T) / 2


def random_unitary(num_qubits: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary from the QR decomposition of a Ginibre matrix"""
    dim = 2**num_qubits
    ginibre = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(ginibre)
    diagonal = np.diag(r)
    return q * (diagonal / np.abs(diagonal))


def random_density_matrix(
    num_qubits: int, rng: np.random.Generator, rank: Optional[int] = None
) -> DensityMatrix:
    dim = 2**num_qubits
    rank = dim if rank is None else rank
    ginibre = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = ginibre @ ginibre.conj().T
    rho = rho / np.trace(rho).real
    return DensityMatrix((rho + rho.conj().T) / 2)


def random_pauli_sum(n: int, num_terms: int, rng: np.random.Generator) -> PauliSum:
    """Real-coefficient PauliSum over random non-identity strings"""
    terms = []
    while len(terms) < num_terms:
        letters = "".join(rng.choice(list(PAULI_LETTERS), size=n))
        if set(letters) == {"I"}:
            continue
        terms.append(PauliString(letters, float(rng.normal())))
    return PauliSum(tuple(terms), n)
