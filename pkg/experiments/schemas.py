"""
Experiment document models.

A document is one TOML file with a `schema_version`, a `kind` and the
sections that kind needs. Unknown keys are rejected everywhere.
"""

from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from pitsim.schemas import AubryAndreParams, EstimatorConfig, GateCountModel, TrainConfig

KINDS = (
    "history",
    "estimate-f",
    "loschmidt",
    "entanglement",
    "ff-sweep",
    "vhd-train",
    "depth-report",
)

DENSE_KINDS = ("history", "estimate-f", "loschmidt", "entanglement")
LABEL_CHARS = "01+-"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RandomModelSection(_Section):
    """Dense random Hamiltonian for protocol checks"""

    n: int = Field(..., ge=1, le=6)
    scale: float = Field(1.0, gt=0.0)
    seed: int = Field(0, ge=0)


class StateSection(_Section):
    """Initial state: 1-based excited sites, or a product label such as '01+-'"""

    sites: Optional[List[int]] = Field(None, min_length=1)
    label: Optional[str] = Field(None, min_length=1)

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.sites is None) == (self.label is None):
            raise ValueError("Give exactly one of state.sites or state.label")
        if self.label is not None and set(self.label) - set(LABEL_CHARS):
            raise ValueError(f"state.label may only use the characters {LABEL_CHARS}")
        if self.sites is not None and len(set(self.sites)) != len(self.sites):
            raise ValueError("state.sites must not repeat a site")
        return self


class ClockSection(_Section):
    m: int = Field(..., ge=1, le=8, description="Clock qubits, N = 2^m")
    epsilon: float = Field(..., gt=0.0, description="Time step")


class ObservableSection(_Section):
    """O1, O2 as lists of [coefficient, letters]; omega is the frequency of the correlator"""

    O1: List[Tuple[float, str]] = Field(..., min_length=1)
    O2: List[Tuple[float, str]] = Field(..., min_length=1)
    omega: float = 0.0


class GridSection(_Section):
    lambdas: Optional[List[float]] = Field(None, min_length=1)
    lambda_range: Optional[Tuple[float, float, float]] = Field(
        None, description="[start, stop, step], stop included"
    )
    log_ns: List[int] = Field(..., min_length=1)
    epsilons: List[float] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _one_lambda_source(self):
        if (self.lambdas is None) == (self.lambda_range is None):
            raise ValueError("Give exactly one of grid.lambdas or grid.lambda_range")
        if self.lambda_range is not None and self.lambda_range[2] <= 0:
            raise ValueError("grid.lambda_range step must be positive")
        if any(k < 1 for k in self.log_ns) or any(e <= 0 for e in self.epsilons):
            raise ValueError("grid.log_ns must be >= 1 and grid.epsilons positive")
        return self

    def lambda_values(self) -> List[float]:
        if self.lambdas is not None:
            return [float(x) for x in self.lambdas]
        start, stop, step = self.lambda_range
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [float(round(start + k * step, 12)) for k in range(count)]


class SweepChecks(_Section):
    """Convergence properties a sweep must show; unset entries are not checked"""

    epsilon: Optional[float] = Field(None, description="Time step of the convergence checks")
    min_log_n: int = Field(2, ge=1, description="Error must not grow in logN from here on")
    reduction: Optional[Tuple[int, int, float]] = Field(
        None, description="[logN_a, logN_b, factor]: error(b) <= error(a) / factor"
    )
    inflection: Optional[Tuple[float, float]] = Field(
        None, description="[lambda, half width] window for the steepest point of the curves"
    )
    inflection_min_log_n: int = Field(6, ge=1)
    dip_epsilon: Optional[float] = Field(
        None, description="Time step at which L_tilde must drop below L_bar somewhere"
    )

    @model_validator(mode="after")
    def _needs_epsilon(self):
        if (self.reduction is not None or self.inflection is not None) and self.epsilon is None:
            raise ValueError("ff.checks.reduction and ff.checks.inflection need ff.checks.epsilon")
        if self.reduction is not None and self.reduction[2] <= 1.0:
            raise ValueError("ff.checks.reduction factor must exceed 1")
        return self


class FreeFermionSection(_Section):
    hopping: Optional[Tuple[int, int]] = Field(
        None, description="1-based sites (i, j) of the c_i^dagger c_j + h.c. observable"
    )
    oracle_times: int = Field(100, ge=1, description="Times used by the dense cross-check")
    checks: SweepChecks = SweepChecks()


class VHDSection(_Section):
    L: int = Field(18, ge=1)
    lambdas: List[float] = Field([1.0, 2.0, 3.0], min_length=1)
    layer_sweep: Optional[List[int]] = Field(None, min_length=1)
    max_loss: float = Field(1e-8, gt=0.0)


class DepthSection(_Section):
    models: List[GateCountModel] = Field(..., min_length=1)
    n: Optional[int] = Field(None, ge=1)
    L: Optional[int] = Field(None, ge=1)
    m_clock: Optional[int] = Field(None, ge=1)


class BenchSection(_Section):
    protocols: List[Literal["f_parallel", "loschmidt_parallel", "purity_shadows"]] = Field(
        ..., min_length=1
    )
    shots: List[int] = Field(..., min_length=2)
    seeds: List[int] = Field(..., min_length=1)


class ExperimentConfig(_Section):
    schema_version: Literal[1]
    kind: Literal[KINDS]
    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)
    out: Optional[str] = None

    model: Optional[AubryAndreParams] = None
    random_model: Optional[RandomModelSection] = None
    state: Optional[StateSection] = None
    clock: Optional[ClockSection] = None
    observable: Optional[ObservableSection] = None
    estimator: EstimatorConfig = EstimatorConfig()
    grid: Optional[GridSection] = None
    ff: FreeFermionSection = FreeFermionSection()
    train: TrainConfig = TrainConfig()
    vhd: VHDSection = VHDSection()
    depth: Optional[DepthSection] = None
    bench: Optional[BenchSection] = None

    @model_validator(mode="after")
    def _kind_requirements(self):
        missing = []
        if self.kind in DENSE_KINDS:
            if (self.model is None) == (self.random_model is None):
                raise ValueError(f"{self.kind} needs exactly one of [model] or [random_model]")
            missing += [s for s in ("state", "clock") if getattr(self, s) is None]
        if self.kind == "estimate-f" and self.observable is None:
            missing.append("observable")
        if self.kind == "ff-sweep":
            missing += [s for s in ("model", "state", "grid") if getattr(self, s) is None]
            if self.state is not None and self.state.sites is None:
                raise ValueError("ff-sweep needs state.sites (single-particle state)")
            if self.grid is not None and self.state is not None and self.state.sites:
                self._check_sweep_grid()
        if self.kind == "vhd-train" and self.model is None:
            missing.append("model")
        if self.kind == "depth-report" and self.depth is None:
            missing.append("depth")
        if missing:
            raise ValueError(f"kind '{self.kind}' requires sections: {', '.join(missing)}")
        return self

    def _check_sweep_grid(self) -> None:
        n = self.model.n if self.model is not None else None
        if n is not None and any(not 1 <= s <= n for s in self.state.sites):
            raise ValueError(f"state.sites must lie in 1..{n}")
        hopping = self.ff.hopping
        if n is not None and hopping is not None:
            if hopping[0] == hopping[1] or any(not 1 <= s <= n for s in hopping):
                raise ValueError(f"ff.hopping must name two different sites in 1..{n}")
        checks = self.ff.checks
        for name in ("epsilon", "dip_epsilon"):
            value = getattr(checks, name)
            if value is not None and value not in self.grid.epsilons:
                raise ValueError(f"ff.checks.{name} = {value} is not in grid.epsilons")
        if checks.reduction is not None:
            if any(k not in self.grid.log_ns for k in checks.reduction[:2]):
                raise ValueError("ff.checks.reduction logN values must be in grid.log_ns")

    @property
    def num_qubits(self) -> int:
        return self.model.n if self.model is not None else self.random_model.n

    def with_overrides(self, seed=None, threads=None, out=None) -> "ExperimentConfig":
        """Apply CLI flags and push the seed/threads into the nested configs"""
        seed = self.seed if seed is None else seed
        threads = self.threads if threads is None else threads
        return self.model_copy(
            update={
                "seed": seed,
                "threads": threads,
                "out": self.out if out is None else out,
                "estimator": self.estimator.model_copy(update={"seed": seed, "threads": threads}),
                "train": self.train.model_copy(update={"seed": seed, "threads": threads}),
            }
        )
