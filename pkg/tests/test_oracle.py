from __future__ import annotations

from math import comb

import numpy as np
import pytest

from cranked_vqe import oracle
from cranked_vqe.hamiltonian import RouthianSpec, qubit_routhian
from cranked_vqe.operators import pauli_matrix
from cranked_vqe.oracle import (
    FixedNBasis,
    exact_ground,
    exact_pair_ground,
    full_space_matrix,
    gap_equation_solve,
    pair_basis,
    pair_hamiltonian,
    routhian_matrix,
)
from cranked_vqe.statevector import SectorSimulator

from conftest import window


def spec(m, delta=0.2, g=0.6, omega=0.5):
    active, jx = window(m, delta)
    return RouthianSpec(active, g, omega, 5.0, jx)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_sector_matrix_matches_compiled_pauli_routhian(m):
    s = spec(m)
    direct = routhian_matrix(s).toarray()
    via_pauli = SectorSimulator(2 * m, s.active.n_act).compile(qubit_routhian(s)).toarray()
    assert np.abs(direct - via_pauli).max() < 1e-12


@pytest.mark.parametrize("m", [2, 3])
def test_full_space_matches_pauli_matrix(m):
    s = spec(m)
    assert np.abs(full_space_matrix(s) - pauli_matrix(qubit_routhian(s))).max() < 1e-11


def test_basis_sizes():
    assert len(FixedNBasis(4, 4)) == 70
    assert len(pair_basis(8, 4)) == comb(8, 4)
    with pytest.raises(ValueError):
        FixedNBasis(2, 5)
    with pytest.raises(ValueError):
        routhian_matrix(spec(2), FixedNBasis(3, 2))


@pytest.mark.parametrize("m,delta", [(2, 0.2), (4, -0.2), (6, 0.3)])
def test_omega_zero_ground_is_seniority_zero(m, delta):
    s = spec(m, delta, g=0.7, omega=0.0)
    a = s.active
    e, _ = exact_ground(s)
    assert e == pytest.approx(exact_pair_ground(m, a.n_pairs, s.g, a.energies - a.lambda_f), abs=1e-10)


def test_pair_hamiltonian_is_pair_block_of_full_matrix():
    s = spec(4, omega=0.0)
    a = s.active
    basis = FixedNBasis(4, a.n_act)
    full = routhian_matrix(s, basis).toarray()
    words = [sum(3 << (2 * k) for k in range(4) if w >> k & 1) for w in pair_basis(4, a.n_pairs)]
    idx = [basis.index[w] for w in words]
    block = full[np.ix_(idx, idx)]
    assert np.allclose(block, pair_hamiltonian(4, a.n_pairs, s.g, a.energies - a.lambda_f), atol=1e-12)


def test_iterative_branch_matches_dense(monkeypatch):
    s = spec(6)
    dense = exact_ground(s)[0]
    monkeypatch.setattr(oracle, "DENSE_LIMIT", 100)
    assert exact_ground(s)[0] == pytest.approx(dense, abs=1e-9)


def test_gap_equation_degenerate_and_residual():
    e = np.zeros(6)
    gap, lam = gap_equation_solve(e, 6, 0.4)
    assert gap == pytest.approx(0.4 * 6 / 2, abs=1e-10)
    e = np.array([-3.0, -1.5, -0.5, 0.4, 1.2, 2.5])
    g = 0.8
    gap, lam = gap_equation_solve(e, 6, g)
    ek = np.sqrt((e - lam) ** 2 + gap ** 2)
    assert 0.5 * g * np.sum(1 / ek) == pytest.approx(1.0, abs=1e-10)
    assert np.sum(1 - (e - lam) / ek) == pytest.approx(6.0, abs=1e-10)
    assert gap_equation_solve(e, 6, 0.01)[0] == 0.0
