from __future__ import annotations

import numpy as np
import pytest

from cranked_vqe.hamiltonian import (
    RouthianSpec,
    build_routhian,
    jx_pauli,
    number_pauli,
    pair_annihilation,
    pair_creation,
    pair_pauli,
    qubit_routhian,
)
from cranked_vqe.operators import FermionOperator, jordan_wigner as jordan, pauli_matrix

from conftest import fermion_matrix, window


@pytest.mark.parametrize("m", [2, 3])
def test_every_routhian_term_matches_direct_matrix(m):
    active, jx = window(m, 0.2)
    spec = RouthianSpec(active, 0.6, 0.7, 5.0, jx)
    op = build_routhian(spec)
    n = spec.num_qubits
    for key, coeff in op.terms.items():
        term = FermionOperator({key: coeff})
        assert np.abs(pauli_matrix(jordan(term, n)) - fermion_matrix(term, n)).max() < 1e-12


def test_routhian_is_hermitian_and_block_structure():
    active, jx = window(3, -0.2)
    spec = RouthianSpec(active, 0.5, 0.4, 5.0, jx)
    h = qubit_routhian(spec)
    assert h.is_hermitian()
    mat = pauli_matrix(h)
    assert np.allclose(mat, mat.conj().T)
    nmat = pauli_matrix(number_pauli(6))
    assert np.allclose(mat @ nmat, nmat @ mat)
    # penalty: a diagonal of lambda_p (N - n_act)^2 on the empty state
    assert mat[0, 0].real == pytest.approx(5.0 * active.n_act ** 2)


def test_pair_operators():
    m = 3
    p1 = pauli_matrix(jordan(pair_annihilation(1), 2 * m))
    pd1 = pauli_matrix(jordan(pair_creation(1), 2 * m))
    assert np.allclose(pd1, p1.conj().T)
    vac = np.zeros(64)
    vac[0] = 1
    assert np.allclose(pd1 @ vac, np.eye(64)[0b001100])
    assert np.allclose(pauli_matrix(pair_pauli(m, 0, 2)), pauli_matrix(pair_pauli(m, 0)).conj().T @ pauli_matrix(pair_pauli(m, 2)))


def test_jx_pauli_one_body():
    active, jx = window(2, 0.3)
    mat = pauli_matrix(jx_pauli(jx))
    for p in range(4):
        for q in range(4):
            assert mat[(1 << p), (1 << q)].real == pytest.approx(jx[p, q], abs=1e-14)


def test_spec_validation():
    active, jx = window(2)
    with pytest.raises(ValueError):
        RouthianSpec(active, -1.0, 0.0, 5.0, jx)
    with pytest.raises(ValueError):
        RouthianSpec(active, 0.5, 0.0, 5.0, np.zeros((3, 3)))
