"""
Library settings read from the environment
"""

import os

from dotenv import load_dotenv

load_dotenv()


class Settings:
    """Numerical defaults shared by all pitsim modules"""

    # Largest register simulated with dense vectors/matrices
    DENSE_QUBIT_CAP = int(os.getenv("PITSIM_DENSE_QUBIT_CAP", "14"))

    # Hermiticity check on user-supplied matrices (max-norm)
    HERMITIAN_TOL = float(os.getenv("PITSIM_HERMITIAN_TOL", "1e-10"))

    # Eigenvalue clustering, relative to ||H||_max
    DEGENERACY_TOL = float(os.getenv("PITSIM_DEGENERACY_TOL", "1e-9"))

    # Normalization and density-matrix validation
    NORM_TOL = 1e-12
    PSD_FLOOR = -1e-10

    @classmethod
    def dense_cap(cls, cap=None) -> int:
        """Explicit cap wins over the environment"""
        return cls.DENSE_QUBIT_CAP if cap is None else int(cap)

    @classmethod
    def hermitian_tol(cls, tol=None) -> float:
        return cls.HERMITIAN_TOL if tol is None else float(tol)

    @classmethod
    def degeneracy_tol(cls, scale: float, tol=None) -> float:
        """Absolute clustering tolerance for a matrix of max-norm `scale`"""
        if tol is not None:
            return float(tol)
        return cls.DEGENERACY_TOL * float(scale)
