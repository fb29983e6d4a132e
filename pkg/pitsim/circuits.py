"""
Gate-logging circuit builder executed by the dense simulator
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from pitsim.errors import DimensionError, WiringError
from pitsim.qcore import StateVector, apply_controlled, apply_unitary

logger = logging.getLogger(__name__)

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_DAG = np.array([[1, 0], [0, -1j]], dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)

GATE_KINDS = ("1q", "2q", "multi", "controlled-1q", "controlled-multi")


def _classify(num_targets: int, num_controls: int) -> str:
    if num_controls:
        return "controlled-1q" if num_targets == 1 else "controlled-multi"
    if num_targets == 1:
        return "1q"
    return "2q" if num_targets == 2 else "multi"


@dataclass(frozen=True)
class GateRecord:
    """One logged gate: a unitary on targets, optionally conditioned on a control"""

    name: str
    kind: str
    targets: Tuple[int, ...]
    controls: Tuple[int, ...] = ()
    matrix: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def wires(self) -> Tuple[int, ...]:
        return self.controls + self.targets


class Circuit:
    """Ordered gate list on a fixed register; gates are applied first to last"""

    def __init__(self, num_qubits: int, name: str = "circuit"):
        self.num_qubits = num_qubits
        self.name = name
        self.records: List[GateRecord] = []

    def _append(self, name: str, matrix, targets: Sequence[int], controls: Sequence[int] = ()):
        targets = tuple(int(t) for t in targets)
        controls = tuple(int(c) for c in controls)
        wires = controls + targets
        if len(set(wires)) != len(wires):
            raise WiringError(f"Gate {name} has overlapping wires {wires}")
        if any(not 0 <= w < self.num_qubits for w in wires):
            raise WiringError(f"Gate {name} touches wires {wires} outside {self.num_qubits} qubits")
        if len(controls) > 1:
            raise WiringError(f"Gate {name}: at most one control wire is supported")
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (2 ** len(targets), 2 ** len(targets)):
            raise DimensionError(
                f"Gate {name} matrix {matrix.shape} does not fit {len(targets)} wires"
            )
        self.records.append(
            GateRecord(name, _classify(len(targets), len(controls)), targets, controls, matrix)
        )
        return self

    def gate(self, name: str, matrix, targets: Sequence[int]) -> "Circuit":
        return self._append(name, matrix, targets)

    def controlled(self, name: str, matrix, control: int, targets: Sequence[int]) -> "Circuit":
        return self._append(name, matrix, targets, (control,))

    def h(self, wire: int) -> "Circuit":
        return self._append("H", HADAMARD, (wire,))

    def s_dag(self, wire: int) -> "Circuit":
        return self._append("Sdg", S_DAG, (wire,))

    def cnot(self, control: int, target: int) -> "Circuit":
        return self._append("CNOT", PAULI_X, (target,), (control,))

    def controlled_phase(self, control: int, target: int, angle: float) -> "Circuit":
        """diag(1, exp(i*angle)) on target when control is 1"""
        return self._append("CP", np.diag([1.0, np.exp(1j * angle)]), (target,), (control,))

    def extend(self, other: "Circuit", offset: int = 0) -> "Circuit":
        """Append another circuit's gates with its wires shifted by offset"""
        for record in other.records:
            self._append(
                record.name,
                record.matrix,
                [t + offset for t in record.targets],
                [c + offset for c in record.controls],
            )
        return self

    def run(self, initial: StateVector) -> StateVector:
        if initial.num_qubits != self.num_qubits:
            raise DimensionError(
                f"Circuit {self.name} acts on {self.num_qubits} qubits, "
                f"initial state has {initial.num_qubits}"
            )
        state = initial
        for record in self.records:
            if record.controls:
                state = apply_controlled(state, record.controls[0], record.matrix, record.targets)
            else:
                state = apply_unitary(state, record.matrix, record.targets)
        logger.debug("Ran %s: %d gates on %d qubits", self.name, len(self.records), self.num_qubits)
        return state

    def gate_counts(self) -> Dict[str, int]:
        counts = Counter(record.kind for record in self.records)
        return {kind: counts.get(kind, 0) for kind in GATE_KINDS}

    def depth(self) -> int:
        """ASAP layering: a gate sits one layer above the latest gate on any of its wires"""
        frontier = [0] * self.num_qubits
        for record in self.records:
            layer = 1 + max(frontier[w] for w in record.wires)
            for w in record.wires:
                frontier[w] = layer
        return max(frontier, default=0)

    def __len__(self) -> int:
        return len(self.records)
