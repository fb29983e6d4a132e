"""
Parameter models shared by the library modules
"""

import math
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

GOLDEN_ALPHA = (math.sqrt(5.0) - 1.0) / 2.0


class AubryAndreParams(BaseModel):
    """Non-uniform XX chain with a quasiperiodic field"""

    model_config = ConfigDict(
        frozen=True, populate_by_name=True, allow_inf_nan=False, extra="forbid"
    )

    n: int = Field(..., ge=2, description="Number of sites")
    J: float = Field(2.0, description="Hopping amplitude")
    lam: float = Field(0.0, alias="lambda", description="Quasiperiodic field strength")
    alpha_aa: float = Field(GOLDEN_ALPHA, gt=0.0, lt=1.0, description="Incommensurate frequency")
    boundary: Literal["periodic", "open"] = "periodic"

    @model_validator(mode="after")
    def _reject_duplicate_bond(self):
        if self.boundary == "periodic" and self.n == 2:
            raise ValueError("Periodic boundary needs n >= 3; use boundary='open' for n=2")
        return self

    def site_fields(self) -> np.ndarray:
        """cos(2 pi alpha j) for sites j = 1..n"""
        sites = np.arange(1, self.n + 1)
        return np.cos(2.0 * np.pi * self.alpha_aa * sites)

    def bonds(self):
        """Zero-based (j, j+1) pairs, closing the ring when periodic"""
        pairs = [(j, j + 1) for j in range(self.n - 1)]
        if self.boundary == "periodic":
            pairs.append((self.n - 1, 0))
        return pairs

    def with_lambda(self, lam: float) -> "AubryAndreParams":
        return AubryAndreParams(
            n=self.n, J=self.J, lam=lam, alpha_aa=self.alpha_aa, boundary=self.boundary
        )


class XYParams(BaseModel):
    """Open XY chain with per-bond couplings and per-site fields"""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    n: int = Field(..., ge=2, description="Number of sites")
    ax: Tuple[float, ...] = Field(..., description="XX couplings, one per bond")
    ay: Tuple[float, ...] = Field(..., description="YY couplings, one per bond")
    az: Tuple[float, ...] = Field(..., description="Z fields, one per site")

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.ax) != self.n - 1 or len(self.ay) != self.n - 1:
            raise ValueError(f"ax and ay need n-1 = {self.n - 1} entries")
        if len(self.az) != self.n:
            raise ValueError(f"az needs n = {self.n} entries")
        return self


class EstimatorConfig(BaseModel):
    """Exact or shot-sampled evaluation of the estimator circuits"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["exact", "sampled"] = "exact"
    shots: int = Field(1024, ge=1, description="Shots per distinct circuit configuration")
    seed: int = Field(0, ge=0, description="Root seed for the Philox streams")
    delta_target: Optional[float] = Field(
        None, gt=0.0, description="Precision goal; overrides shots with ceil(1/delta^2)"
    )
    threads: int = Field(1, ge=1, description="Worker threads for circuit cells")

    @property
    def shots_per_cell(self) -> int:
        if self.delta_target is not None:
            return max(1, math.ceil(1.0 / self.delta_target**2))
        return self.shots


class TrainConfig(BaseModel):
    """ADAM training of the Cartan ansatz"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lr_alpha: float = Field(0.1, gt=0.0)
    lr_beta: float = Field(0.1, gt=0.0)
    max_iters: int = Field(100_000, ge=1)
    stop_loss: float = Field(1e-14, gt=0.0)
    restarts: int = Field(10, ge=1)
    seed: int = Field(0, ge=0)
    gradient: Literal["adjoint", "parameter_shift"] = "adjoint"
    tied: bool = False
    threads: int = Field(1, ge=1)
    log_every: int = Field(1000, ge=1)


class GateCountModel(BaseModel):
    """Trotterized gate-count model for sequential and parallel-in-time circuits"""

    model_config = ConfigDict(
        frozen=True, populate_by_name=True, allow_inf_nan=False, extra="forbid"
    )

    gamma: float = Field(1.0, gt=0.0, description="Trotter prefactor")
    beta: float = Field(2.0, gt=0.0, description="Control overhead factor")
    local_terms: float = Field(
        ..., alias="l", gt=0.0, description="Number of local Hamiltonian terms"
    )
    alpha_exp: float = Field(2.0, gt=0.0, description="Trotter error exponent")
    epsilon: float = Field(1.0, gt=0.0, description="Time step")
    N: int = Field(2, ge=2, description="Number of times, a power of two")

    @field_validator("N")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            raise ValueError(f"N must be a power of two, got {value}")
        return value

    @property
    def log_n(self) -> int:
        return self.N.bit_length() - 1


class EstimateRecord(BaseModel):
    """Serialized estimator result"""

    protocol: str
    params: dict = Field(default_factory=dict)
    mode: Literal["exact", "sampled"]
    value_re: float
    value_im: float = 0.0
    stderr: float = Field(..., ge=0.0)
    shots: int = Field(..., ge=0)
    seed: Optional[int] = None
