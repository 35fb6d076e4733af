"""Observables on converged states: alignment, pair densities, gaps, J(2)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .active_space import ActiveSpace
from .hamiltonian import number_pauli, pair_pauli
from .operators import PauliSum
from .statevector import StateVector, expectation, expectation_value

NORM_TOL = 1e-8


@dataclass(frozen=True)
class PairDensity:
    """rho_kl = <P_k^+ P_l>."""

    rho: np.ndarray

    @property
    def m(self) -> int:
        return self.rho.shape[0]

    def off_diagonal_abs_sum(self) -> float:
        a = np.abs(self.rho)
        return float(a.sum() - np.trace(a))


@dataclass(frozen=True)
class ObservableSet:
    energy: float
    jx: float
    delta_kappa: float
    delta_coh: float
    n_mean: float
    n_var: float
    rho: PairDensity


def pair_density(state: StateVector, m: int) -> PairDensity:
    rho = np.empty((m, m), dtype=complex)
    for k in range(m):
        for l in range(m):
            rho[k, l] = expectation_value(state, pair_pauli(m, k, l))
    return PairDensity(rho)


def anomalous_gap(state: StateVector, m: int, g: float) -> float:
    """G |sum_k <P_k>|; zero for any state of sharp particle number."""
    total = sum(expectation_value(state, pair_pauli(m, k)) for k in range(m))
    return g * abs(total)


def coherence_gap(rho: PairDensity, g: float) -> float:
    """G sqrt(sum_{k != l} |rho_kl|), absolute values taken term by term."""
    return g * math.sqrt(rho.off_diagonal_abs_sum())


def number_moments(state: StateVector) -> tuple[float, float]:
    n_op = number_pauli(state.num_qubits)
    mean = expectation(state, n_op)
    second = expectation(state, n_op * n_op)
    return mean, max(second - mean * mean, 0.0)


def measure(state: StateVector, active: ActiveSpace, g: float, jx_pauli: PauliSum,
            energy: float = math.nan) -> ObservableSet:
    norm = state.norm()
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"state norm {norm:.12f} is not 1")
    m = active.m
    rho = pair_density(state, m)
    n_mean, n_var = number_moments(state)
    return ObservableSet(
        energy=float(energy),
        jx=expectation(state, jx_pauli),
        delta_kappa=anomalous_gap(state, m, g),
        delta_coh=coherence_gap(rho, g),
        n_mean=n_mean,
        n_var=n_var,
        rho=rho,
    )


def dynamical_moi(jx_path: Sequence[tuple[float, float]]) -> list[tuple[float, float, bool]]:
    """dJx/domega on the mesh: (omega, J2, one_sided) per point.

    Central differences inside (non-uniform spacing allowed), one-sided
    differences at both ends.
    """
    w = np.array([p[0] for p in jx_path], dtype=float)
    j = np.array([p[1] for p in jx_path], dtype=float)
    if w.size < 2:
        raise ValueError("need at least two frequencies")
    if np.any(np.diff(w) <= 0):
        raise ValueError("omega mesh must be strictly ascending")
    out = [(w[0], (j[1] - j[0]) / (w[1] - w[0]), True)]
    for i in range(1, w.size - 1):
        out.append((w[i], (j[i + 1] - j[i - 1]) / (w[i + 1] - w[i - 1]), False))
    out.append((w[-1], (j[-1] - j[-2]) / (w[-1] - w[-2]), True))
    return [(float(a), float(b), c) for a, b, c in out]
