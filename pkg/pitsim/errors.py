"""
Exception hierarchy for pitsim
"""


class PitsimError(Exception):
    """Base class for every error raised by the toolkit"""


class DenseCapError(PitsimError, ValueError):
    """Qubit count exceeds the dense simulation cap"""

    def __init__(self, num_qubits: int, cap: int):
        self.num_qubits = num_qubits
        self.cap = cap
        super().__init__(
            f"{num_qubits} qubits exceed the dense cap of {cap} "
            f"(raise PITSIM_DENSE_QUBIT_CAP or use the free-fermion path)"
        )


class DimensionError(PitsimError, ValueError):
    """Inconsistent vector length or bipartition"""


class HermiticityError(PitsimError, ValueError):
    """Matrix expected to be Hermitian is not"""

    def __init__(self, deviation: float, tol: float):
        self.deviation = deviation
        self.tol = tol
        super().__init__(
            f"Matrix is not Hermitian: max|A - A^dagger| = {deviation:.3e} > {tol:.1e}"
        )


class WiringError(PitsimError, ValueError):
    """Gate wires overlap or fall outside the register"""


class ClockIndexError(PitsimError, IndexError):
    """Clock value outside 0..N-1"""


class ShotBudgetError(PitsimError, ValueError):
    """Sampling budget is not usable (no shots, too few snapshots)"""


class TrainingThresholdError(PitsimError, ValueError):
    """Trained ansatz loss is above the acceptance threshold"""

    def __init__(self, loss: float, threshold: float, report=None):
        self.loss = loss
        self.threshold = threshold
        self.report = report
        super().__init__(
            f"Trained loss {loss:.3e} is above the threshold {threshold:.1e}; "
            f"refusing to build the diagonalized circuit"
        )


class ClosureTruncatedError(PitsimError):
    """Lie closure grew past the requested maximum dimension"""

    def __init__(self, partial_dim: int, max_dim: int):
        self.partial_dim = partial_dim
        self.max_dim = max_dim
        super().__init__(
            f"Lie closure exceeded max_dim={max_dim} (reached {partial_dim} elements)"
        )


class ConfigError(PitsimError, ValueError):
    """Experiment document is invalid"""

    def __init__(self, message: str, field_paths=None):
        self.field_paths = list(field_paths or [])
        if self.field_paths:
            message = f"{message}: " + "; ".join(self.field_paths)
        super().__init__(message)


class NumericValidationError(PitsimError):
    """A run-time cross-check (oracle, bound, invariant) failed"""
