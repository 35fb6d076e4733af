"""Cranked Nilsson + pairing Routhian over an active space and its qubit image."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .active_space import ActiveSpace
from .operators import (
    ANNIHILATE,
    CREATE,
    FermionOperator,
    PauliSum,
    jordan_wigner,
    number,
)

G_DEFAULT = 0.5202
LAMBDA_P_DEFAULT = 5.0


@dataclass(frozen=True, eq=False)
class RouthianSpec:
    active: ActiveSpace
    g: float
    omega: float
    lambda_p: float
    jx: np.ndarray

    def __post_init__(self):
        if self.g < 0 or self.omega < 0 or self.lambda_p < 0:
            raise ValueError("g, omega and lambda_p must be non-negative")
        n = self.active.num_qubits
        if np.shape(self.jx) != (n, n):
            raise ValueError(f"jx has shape {np.shape(self.jx)}, expected {(n, n)}")

    @property
    def num_qubits(self) -> int:
        return self.active.num_qubits

    @property
    def orbital_energies(self) -> np.ndarray:
        """epsilon_k - lambda_F per spin orbital."""
        return np.repeat(self.active.energies - self.active.lambda_f, 2)


def pair_creation(k: int) -> FermionOperator:
    """P_k^dagger = a_{k+}^dagger a_{k-}^dagger."""
    return FermionOperator.term((2 * k, CREATE), (2 * k + 1, CREATE))


def pair_annihilation(k: int) -> FermionOperator:
    """P_k = a_{k-} a_{k+}."""
    return FermionOperator.term((2 * k + 1, ANNIHILATE), (2 * k, ANNIHILATE))


def one_body(matrix: np.ndarray, tol: float = 0.0) -> FermionOperator:
    """sum_ij M_ij a_i^dagger a_j."""
    terms = {}
    for i, j in zip(*np.nonzero(np.abs(matrix) > tol)):
        terms[((int(i), CREATE), (int(j), ANNIHILATE))] = matrix[i, j]
    return FermionOperator(terms)


def number_operator(num_modes: int) -> FermionOperator:
    op = FermionOperator()
    for p in range(num_modes):
        op = op + number(p)
    return op


def pairing_operator(m: int) -> FermionOperator:
    """sum_{kl} P_k^dagger P_l including k = l."""
    op = FermionOperator()
    for k in range(m):
        for l in range(m):
            op = op + pair_creation(k) * pair_annihilation(l)
    return op


def build_routhian(spec: RouthianSpec) -> FermionOperator:
    """H' = sum (e_k - lambda_F) n - G sum P_k^+ P_l - omega J_x + lambda_p (N - N_act)^2."""
    n = spec.num_qubits
    h = one_body(np.diag(spec.orbital_energies))
    h = h + (-spec.g) * pairing_operator(spec.active.m)
    h = h + (-spec.omega) * one_body(np.asarray(spec.jx), tol=0.0)
    if spec.lambda_p:
        shifted = number_operator(n) + FermionOperator.identity(-spec.active.n_act)
        h = h + spec.lambda_p * (shifted * shifted)
    return h


def qubit_routhian(spec: RouthianSpec) -> PauliSum:
    return jordan_wigner(build_routhian(spec), spec.num_qubits)


@lru_cache(maxsize=None)
def number_pauli(num_qubits: int) -> PauliSum:
    return jordan_wigner(number_operator(num_qubits), num_qubits)


@lru_cache(maxsize=None)
def pair_pauli(m: int, k: int, l: int | None = None) -> PauliSum:
    """JW image of P_k (l is None) or of P_k^dagger P_l."""
    if l is None:
        return jordan_wigner(pair_annihilation(k), 2 * m)
    return jordan_wigner(pair_creation(k) * pair_annihilation(l), 2 * m)


def jx_pauli(jx: np.ndarray) -> PauliSum:
    n = jx.shape[0]
    return jordan_wigner(one_body(np.asarray(jx)), n)
