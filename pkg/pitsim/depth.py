"""
Gate-count models for sequential and clock-parallel evolution.

All totals are exact finite sums. The audit helper reads the gate log of any
circuit built by this package, so the analytic counts can be compared with
what the simulator actually executed.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, NamedTuple, Optional

import numpy as np
import pandas as pd

from pitsim.circuits import Circuit
from pitsim.schemas import GateCountModel

logger = logging.getLogger(__name__)

CHUNK = 1 << 20
MAX_LOG_N = 32


@dataclass(frozen=True)
class DepthReport:
    N: int
    seq_total: float
    par_total: float
    ratio: float
    asymptotic_ratio: float
    crossover_N: Optional[int] = None


class DiagonalizedCounts(NamedTuple):
    controlled_rotations: int
    w_gates: int
    hadamards: int
    total: int


class GateAudit(NamedTuple):
    counts: Dict[str, int]
    total: int
    depth: int


def _power_sum(start: int, stop: int, epsilon: float, alpha: float) -> float:
    """sum_{t=start}^{stop-1} (eps t)^alpha, accumulated in chunks"""
    total = 0.0
    for low in range(start, stop, CHUNK):
        t = np.arange(low, min(stop, low + CHUNK), dtype=float)
        total += float(np.sum((epsilon * t) ** alpha))
    return total


def sequential_total(model: GateCountModel, N: Optional[int] = None) -> float:
    N = model.N if N is None else N
    return model.gamma * model.local_terms * _power_sum(1, N, model.epsilon, model.alpha_exp)


def parallel_total(model: GateCountModel, N: Optional[int] = None) -> float:
    N = model.N if N is None else N
    log_n = N.bit_length() - 1
    steps = model.epsilon * 2.0 ** np.arange(log_n)
    return model.gamma * model.beta * model.local_terms**2 * float(np.sum(steps**model.alpha_exp))


def crossover(model: GateCountModel, max_log_n: int = MAX_LOG_N) -> Optional[int]:
    """Smallest power of two N >= 2 where the parallel total is at most the sequential one"""
    seq = 0.0
    for log_n in range(1, max_log_n + 1):
        N = 2**log_n
        step_sum = _power_sum(N // 2, N, model.epsilon, model.alpha_exp)
        seq += model.gamma * model.local_terms * step_sum
        if parallel_total(model, N) <= seq:
            return N
    logger.warning(
        "No crossover up to N = 2^%d for beta*l = %g", max_log_n, model.beta * model.local_terms
    )
    return None


def trotter_counts(model: GateCountModel) -> DepthReport:
    seq = sequential_total(model)
    par = parallel_total(model)
    return DepthReport(
        N=model.N,
        seq_total=seq,
        par_total=par,
        ratio=par / seq,
        asymptotic_ratio=model.beta * model.local_terms / model.N,
        crossover_N=crossover(model),
    )


def diagonalized_counts(
    n: int, m_clock: int, w_gate_count: int, entanglement_only: bool = False
) -> DiagonalizedCounts:
    """
    Clock Hadamards, one controlled rotation per (clock qubit, system qubit) and
    W^dagger ... W around them. entanglement_only drops the closing W.
    """
    rotations = m_clock * n
    w_gates = w_gate_count if entanglement_only else 2 * w_gate_count
    return DiagonalizedCounts(rotations, w_gates, m_clock, rotations + w_gates + m_clock)


def diagonalized_sequential_counts(n: int, N: int, w_gate_count: int) -> int:
    """One run per time t = 1..N-1, each with n rotations and two W layers"""
    return (N - 1) * (n + 2 * w_gate_count)


def diagonalized_crossover(n: int, w_gate_count: int, max_log_n: int = MAX_LOG_N) -> Optional[int]:
    for log_n in range(1, max_log_n + 1):
        N = 2**log_n
        if diagonalized_counts(n, log_n, w_gate_count).total <= diagonalized_sequential_counts(
            n, N, w_gate_count
        ):
            return N
    return None


def depth_table(
    models: Iterable[GateCountModel],
    n: Optional[int] = None,
    w_gate_count: Optional[int] = None,
) -> pd.DataFrame:
    """One row per model; diagonalized columns are filled when n and w_gate_count are given"""
    rows = []
    for index, model in enumerate(models):
        report = trotter_counts(model)
        row = {
            "model": index,
            "n": n,
            "N": model.N,
            "gamma": model.gamma,
            "beta": model.beta,
            "l": model.local_terms,
            "alpha_exp": model.alpha_exp,
            "epsilon": model.epsilon,
            "seq_total": report.seq_total,
            "par_total": report.par_total,
            "ratio": report.ratio,
            "asymptotic_ratio": report.asymptotic_ratio,
            "crossover_N": report.crossover_N,
        }
        if n is not None and w_gate_count is not None:
            row["diag_par_total"] = diagonalized_counts(n, model.log_n, w_gate_count).total
            row["diag_seq_total"] = diagonalized_sequential_counts(n, model.N, w_gate_count)
        rows.append(row)
    return pd.DataFrame(rows)


def audit_gate_log(circuit: Circuit) -> GateAudit:
    counts = circuit.gate_counts()
    audit = GateAudit(counts, len(circuit), circuit.depth())
    logger.debug("Audit %s: %s, depth %d", circuit.name, counts, audit.depth)
    return audit
