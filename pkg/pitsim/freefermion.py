"""
Single-particle (Jordan-Wigner) engine for the Aubry-Andre chain.

Everything here works with n x n matrices, so chains of a few hundred sites
are cheap. The hopping matrix caches its eigendecomposition; time series are
evaluated from it in vectorized form.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd

from pitsim.hamiltonians import energy_components, temporal_fluctuations
from pitsim.qcore import Spectrum, hermitian_eig
from pitsim.schemas import AubryAndreParams

logger = logging.getLogger(__name__)

CLUSTER_TOL = 1e-10


def _check_hermitian(matrix: np.ndarray, name: str) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{name} must be square, got {matrix.shape}")
    if np.max(np.abs(matrix - matrix.conj().T)) > 1e-12:
        raise ValueError(f"{name} must be Hermitian")


@dataclass(frozen=True)
class HoppingMatrix:
    """Single-particle Hamiltonian M_sigma with its cached spectrum"""

    matrix: np.ndarray
    boundary: str = "open"
    parity: int = -1

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        _check_hermitian(matrix, "Hopping matrix")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def spectrum(self) -> Spectrum:
        logger.debug("Diagonalizing %d-site hopping matrix", self.n)
        return hermitian_eig(self.matrix)

    @property
    def cluster_tol(self) -> float:
        return CLUSTER_TOL * float(np.max(np.abs(self.matrix)))


@dataclass(frozen=True)
class SingleParticleState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex).ravel()
        if abs(np.linalg.norm(amplitudes) - 1.0) > 1e-12:
            raise ValueError("Single-particle state must have unit norm")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)


@dataclass(frozen=True)
class OneBodyObservable:
    """O = sum_ij M_ij c_i^dagger c_j"""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        _check_hermitian(matrix, "Observable")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)


class FluctuationReport(NamedTuple):
    sigma2: float
    delta2: float
    Lbar: float


def build_hopping_matrix(p: AubryAndreParams, n_particles_parity: int = -1) -> HoppingMatrix:
    """
    J/2 on every bond, lambda*cos(2 pi alpha j) on the diagonal.

    With a periodic boundary the closing bond is +J/2 in the odd sector
    (sigma = -1, which holds every single-particle state) and -J/2 otherwise.
    """
    if n_particles_parity not in (-1, 1):
        raise ValueError("Parity sector must be -1 or +1")
    matrix = np.diag(p.lam * p.site_fields()).astype(complex)
    for j in range(p.n - 1):
        matrix[j, j + 1] = matrix[j + 1, j] = p.J / 2.0
    if p.boundary == "periodic":
        closing = p.J / 2.0 if n_particles_parity == -1 else -p.J / 2.0
        matrix[p.n - 1, 0] = matrix[0, p.n - 1] = closing
    return HoppingMatrix(matrix, p.boundary, n_particles_parity)


def site_superposition(n: int, sites: Sequence[int]) -> SingleParticleState:
    """Equal superposition of single excitations on the listed sites (1-based)"""
    if len(set(sites)) != len(sites):
        raise ValueError(f"Sites {list(sites)} contain duplicates")
    amplitudes = np.zeros(n, dtype=complex)
    for site in sites:
        if not 1 <= site <= n:
            raise ValueError(f"Site {site} outside 1..{n}")
        amplitudes[site - 1] = 1.0
    return SingleParticleState(amplitudes / np.sqrt(len(sites)))


def hopping_observable(n: int, i: int, j: int) -> OneBodyObservable:
    """c_i^dagger c_j + h.c. for 1-based sites i != j"""
    matrix = np.zeros((n, n), dtype=complex)
    matrix[i - 1, j - 1] = matrix[j - 1, i - 1] = 1.0
    return OneBodyObservable(matrix)


def _overlap_weights(M: HoppingMatrix, psi: SingleParticleState) -> np.ndarray:
    return np.abs(M.spectrum.eigenvectors.conj().T @ psi.amplitudes) ** 2


def loschmidt_series(
    M: HoppingMatrix, psi: SingleParticleState, times: Iterable[float]
) -> np.ndarray:
    """|psi^dagger exp(-iMt) psi|^2 for every t in times"""
    times = np.asarray(list(times), dtype=float)
    weights = _overlap_weights(M, psi)
    amplitudes = np.exp(-1j * np.outer(times, M.spectrum.eigenvalues)) @ weights
    return np.abs(amplitudes) ** 2


def loschmidt_t(M: HoppingMatrix, psi: SingleParticleState, t: float) -> float:
    return float(loschmidt_series(M, psi, np.array([t]))[0])


def loschmidt_bar(M: HoppingMatrix, psi: SingleParticleState) -> float:
    """sum_k |phi_k^dagger psi|^4 with degenerate levels merged"""
    return energy_components(M.spectrum, psi.amplitudes, M.cluster_tol).loschmidt_bar()


def loschmidt_tilde(M: HoppingMatrix, psi: SingleParticleState, N: int, epsilon: float) -> float:
    return float(np.mean(loschmidt_series(M, psi, epsilon * np.arange(N))))


def purity_single_sum(M: HoppingMatrix, psi: SingleParticleState, N: int, epsilon: float) -> float:
    """Tr[rho_S^2] = (2/N^2) sum_t (N - t) L(eps t) - 1/N"""
    echoes = loschmidt_series(M, psi, epsilon * np.arange(N))
    multiplicity = N - np.arange(N)
    return float(2.0 / N**2 * np.dot(multiplicity, echoes) - 1.0 / N)


def purity_double_sum(M: HoppingMatrix, psi: SingleParticleState, N: int, epsilon: float) -> float:
    """(1/N^2) sum_{t,t'} |<psi(eps t')|psi(eps t)>|^2 from the evolved states themselves"""
    spectrum = M.spectrum
    coords = spectrum.eigenvectors.conj().T @ psi.amplitudes
    phases = np.exp(-1j * np.outer(epsilon * np.arange(N), spectrum.eigenvalues))
    evolved = (phases * coords) @ spectrum.eigenvectors.T
    gram = evolved.conj() @ evolved.T
    return float(np.sum(np.abs(gram) ** 2) / N**2)


def observable_fluctuations(
    M: HoppingMatrix, psi: SingleParticleState, O: OneBodyObservable
) -> FluctuationReport:
    """(sigma2, Delta2, Lbar) for a one-body observable and a single-particle state"""
    sigma2, delta2, Lbar = temporal_fluctuations(
        M.spectrum, psi.amplitudes, O.matrix, M.cluster_tol
    )
    return FluctuationReport(sigma2, delta2, Lbar)


def sweep_point(
    M: HoppingMatrix,
    psi: SingleParticleState,
    log_n: int,
    epsilon: float,
    observable: Optional[OneBodyObservable] = None,
) -> dict:
    """One row of the (lambda, logN, epsilon) sweep table"""
    N = 2**log_n
    L_tilde = loschmidt_tilde(M, psi, N, epsilon)
    purity_s = purity_single_sum(M, psi, N, epsilon)
    row = {
        "logN": log_n,
        "epsilon": epsilon,
        "L_tilde": L_tilde,
        "L_bar": loschmidt_bar(M, psi),
        "purity_S": purity_s,
        "E2": 1.0 - purity_s,
        "sigma2": np.nan,
        "bound": np.nan,
        "delta2": np.nan,
    }
    if observable is not None:
        report = observable_fluctuations(M, psi, observable)
        row["sigma2"] = report.sigma2
        row["bound"] = report.delta2 * purity_s
        row["delta2"] = report.delta2
    return row


def approximation_error_map(
    params: Sequence[AubryAndreParams],
    psi: SingleParticleState,
    epsilons: Sequence[float],
    log_ns: Sequence[int],
) -> pd.DataFrame:
    """lambda-averaged |L~ - Lbar| on an (epsilon, logN) grid"""
    models = [build_hopping_matrix(p) for p in params]
    bars = np.array([loschmidt_bar(M, psi) for M in models])
    rows = []
    for epsilon in epsilons:
        for log_n in log_ns:
            tildes = np.array([loschmidt_tilde(M, psi, 2**log_n, epsilon) for M in models])
            rows.append(
                {
                    "epsilon": float(epsilon),
                    "logN": int(log_n),
                    "mean_abs_error": float(np.mean(np.abs(tildes - bars))),
                }
            )
    return pd.DataFrame(rows).sort_values(["epsilon", "logN"]).reset_index(drop=True)
