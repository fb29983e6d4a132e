"""
Model builders and exact-diagonalization helpers.

Sites are numbered 1..n in formulas and map to wires 0..n-1. A site is
"excited" when its Z eigenvalue is +1 (bit 0).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from pitsim.qcore import (
    DensityMatrix,
    PauliString,
    PauliSum,
    Spectrum,
    StateVector,
    as_dense,
    hermitian_eig,
)
from pitsim.schemas import AubryAndreParams, XYParams
from pitsim.settings import Settings

logger = logging.getLogger(__name__)

Operator = Union[PauliSum, np.ndarray]


def build_aubry_andre_spin(p: AubryAndreParams) -> PauliSum:
    """(J/4) sum (XX + YY) + (lambda/4) sum cos(2 pi alpha j) (Z_j + 2)"""
    terms = []
    hopping = p.J / 4.0
    if hopping != 0.0:
        for a, b in p.bonds():
            terms.append(PauliString.on_sites(p.n, {a: "X", b: "X"}, hopping))
            terms.append(PauliString.on_sites(p.n, {a: "Y", b: "Y"}, hopping))
    shift = 0.0
    for wire, cosine in enumerate(p.site_fields()):
        coefficient = p.lam / 4.0 * cosine
        if coefficient != 0.0:
            terms.append(PauliString.on_sites(p.n, {wire: "Z"}, coefficient))
            shift += 2.0 * coefficient
    if shift != 0.0:
        terms.append(PauliString("I" * p.n, shift))
    return PauliSum(tuple(terms), p.n)


def build_xy_spin(p: XYParams) -> PauliSum:
    """Open chain sum_j ax_j X_j X_j+1 + ay_j Y_j Y_j+1 + sum_j az_j Z_j"""
    terms = []
    for j in range(p.n - 1):
        if p.ax[j] != 0.0:
            terms.append(PauliString.on_sites(p.n, {j: "X", j + 1: "X"}, p.ax[j]))
        if p.ay[j] != 0.0:
            terms.append(PauliString.on_sites(p.n, {j: "Y", j + 1: "Y"}, p.ay[j]))
    for j in range(p.n):
        if p.az[j] != 0.0:
            terms.append(PauliString.on_sites(p.n, {j: "Z"}, p.az[j]))
    return PauliSum(tuple(terms), p.n)


def single_excitation_indices(n: int) -> np.ndarray:
    """Basis index of s+_j |down...down> for j = 1..n"""
    full = 2**n - 1
    return np.array([full - 2 ** (n - 1 - wire) for wire in range(n)])


def single_excitation_block(h: Operator, n: int) -> np.ndarray:
    """Restriction of an n-site spin operator to the one-excitation sector"""
    matrix = as_dense(h)
    index = single_excitation_indices(n)
    return matrix[np.ix_(index, index)]


def single_excitation_state(amplitudes) -> StateVector:
    """Embed a single-particle amplitude vector into the 2^n spin register"""
    amplitudes = np.asarray(amplitudes, dtype=complex)
    n = amplitudes.shape[0]
    full = np.zeros(2**n, dtype=complex)
    full[single_excitation_indices(n)] = amplitudes
    return StateVector.from_amplitudes(full)


def spin_field_for_fermionic(lam: float) -> float:
    """
    Spin-chain field whose one-excitation block reproduces a fermionic field lam.

    The Jordan-Wigner image of (lambda/4) cos (Z+2) is (lambda/2) cos c^dagger c
    plus a constant, so the spin model needs twice the fermionic field.
    """
    return 2.0 * lam


def single_excitation_offset(p: AubryAndreParams) -> float:
    """Identity shift of the one-excitation block relative to the hopping matrix"""
    return float(p.lam / 4.0 * p.site_fields().sum())


def eigenvalue_clusters(eigenvalues: np.ndarray, tol: float) -> List[np.ndarray]:
    """Group eigenvalue indices by sorted-gap thresholding, lowest energy first"""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    order = np.argsort(eigenvalues, kind="stable")
    if order.size == 0:
        return []
    breaks = np.nonzero(np.diff(eigenvalues[order]) > tol)[0] + 1
    return [np.sort(chunk) for chunk in np.split(order, breaks)]


@dataclass(frozen=True)
class EnergyComponents:
    """
    Projection of a state onto the distinct-eigenvalue eigenspaces.

    vectors[:, k] is the normalized projection |k> (zero when weight is 0),
    weights[k] = |c_k|^2.
    """

    energies: np.ndarray
    weights: np.ndarray
    vectors: np.ndarray
    clusters: Tuple[np.ndarray, ...]

    @property
    def count(self) -> int:
        return self.energies.shape[0]

    def loschmidt_bar(self) -> float:
        return float(np.sum(self.weights**2))

    def projector(self, spectrum: Spectrum, k: int) -> np.ndarray:
        basis = spectrum.eigenvectors[:, self.clusters[k]]
        return basis @ basis.conj().T


def energy_components(
    spectrum: Spectrum, psi: np.ndarray, tol: Optional[float] = None
) -> EnergyComponents:
    tol = Settings.degeneracy_tol(spectrum.scale, tol)
    clusters = eigenvalue_clusters(spectrum.eigenvalues, tol)
    psi = np.asarray(psi, dtype=complex)
    energies = np.empty(len(clusters))
    weights = np.empty(len(clusters))
    vectors = np.zeros((spectrum.dim, len(clusters)), dtype=complex)
    for k, members in enumerate(clusters):
        basis = spectrum.eigenvectors[:, members]
        projected = basis @ (basis.conj().T @ psi)
        weight = float(np.vdot(projected, projected).real)
        energies[k] = float(np.mean(spectrum.eigenvalues[members]))
        weights[k] = weight
        if weight > 0.0:
            vectors[:, k] = projected / np.sqrt(weight)
    logger.debug("Found %d eigenvalue clusters at tol=%.2e", len(clusters), tol)
    return EnergyComponents(energies, weights, vectors, tuple(clusters))


def _spectrum_of(h) -> Spectrum:
    return h if isinstance(h, Spectrum) else hermitian_eig(h)


def _vector_of(psi) -> np.ndarray:
    return psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)


def dephased_state(h, psi0: StateVector, tol: Optional[float] = None) -> DensityMatrix:
    """Infinite-time average sum_k |c_k|^2 |k><k|"""
    components = energy_components(_spectrum_of(h), _vector_of(psi0), tol)
    rho = (components.vectors * components.weights) @ components.vectors.conj().T
    return DensityMatrix((rho + rho.conj().T) / 2)


def loschmidt_bar_dense(h, psi0, tol: Optional[float] = None) -> float:
    """Infinite-time Loschmidt average sum_k |c_k|^4"""
    return energy_components(_spectrum_of(h), _vector_of(psi0), tol).loschmidt_bar()


def _common_period(gaps: np.ndarray, tol: float, max_denominator: int) -> Optional[float]:
    positive = gaps[gaps > tol]
    if positive.size == 0:
        return None
    smallest = positive.min()
    for k in range(1, max_denominator + 1):
        base = smallest / k
        multiples = np.round(positive / base)
        if np.all(np.abs(positive - multiples * base) <= tol):
            return 2.0 * np.pi / base
    return None


def distinct_eigenvalue_count(
    h, tol: Optional[float] = None, max_denominator: int = 64
) -> Tuple[int, Optional[float]]:
    """
    Number M of distinct eigenvalues and, when all gaps share a common
    quantum 2*pi/tau, the recurrence time tau (None otherwise).
    """
    spectrum = _spectrum_of(h)
    tol = Settings.degeneracy_tol(spectrum.scale, tol)
    clusters = eigenvalue_clusters(spectrum.eigenvalues, tol)
    energies = np.array([np.mean(spectrum.eigenvalues[c]) for c in clusters])
    tau = _common_period(energies - energies.min(), tol, max_denominator)
    if tau is None and len(clusters) > 1:
        logger.debug("No common period among %d distinct eigenvalues", len(clusters))
    return len(clusters), tau


def temporal_fluctuations(
    spectrum: Spectrum,
    psi,
    observable: np.ndarray,
    tol: Optional[float] = None,
    support_tol: float = 1e-12,
) -> Tuple[float, float, float]:
    """
    Infinite-time variance of <O(t)> and its spread over the populated eigenspaces.

    Returns (sigma2, delta2, Lbar) with sigma2 = sum_{k!=k'} |c_k|^2 |c_k'|^2 |<k|O|k'>|^2
    and delta2 the squared eigenvalue range of O compressed to span{|k>: |c_k|^2 > support_tol}.
    """
    components = energy_components(spectrum, _vector_of(psi), tol)
    support = components.weights > support_tol
    vectors = components.vectors[:, support]
    weights = components.weights[support]
    compressed = vectors.conj().T @ np.asarray(observable, dtype=complex) @ vectors
    couplings = np.abs(compressed) ** 2
    np.fill_diagonal(couplings, 0.0)
    sigma2 = float(weights @ couplings @ weights)
    if weights.size > 1:
        levels = np.linalg.eigvalsh((compressed + compressed.conj().T) / 2)
        delta2 = float((levels[-1] - levels[0]) ** 2)
    else:
        delta2 = 0.0
    return sigma2, delta2, components.loschmidt_bar()
