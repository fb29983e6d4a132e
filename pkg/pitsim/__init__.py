"""
pitsim: parallel-in-time simulation with history states
"""

from pitsim.errors import (
    ClockIndexError,
    ClosureTruncatedError,
    ConfigError,
    DenseCapError,
    NumericValidationError,
    PitsimError,
    ShotBudgetError,
    TrainingThresholdError,
)
from pitsim.histstate import HistoryState, build_history_state
from pitsim.qcore import DensityMatrix, PauliString, PauliSum, Spectrum, StateVector
from pitsim.schemas import AubryAndreParams, EstimatorConfig, GateCountModel, TrainConfig

__version__ = "1.0.0"

__all__ = [
    "AubryAndreParams",
    "ClockIndexError",
    "ClosureTruncatedError",
    "ConfigError",
    "DenseCapError",
    "DensityMatrix",
    "EstimatorConfig",
    "GateCountModel",
    "HistoryState",
    "NumericValidationError",
    "PauliString",
    "PauliSum",
    "PitsimError",
    "ShotBudgetError",
    "Spectrum",
    "StateVector",
    "TrainConfig",
    "TrainingThresholdError",
    "build_history_state",
]
