"""Exact reference solutions for small active spaces.

Everything here is built directly from second-quantized operators acting on
occupation words, without going through Pauli strings, so it can check the
qubit path independently.
"""

from __future__ import annotations

import math
from itertools import combinations
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .hamiltonian import RouthianSpec

DENSE_LIMIT = 4000
ITERATIVE_LIMIT = 2_000_000


class FixedNBasis:
    """Occupation words of 2m spin orbitals with popcount n, ascending."""

    def __init__(self, m: int, n: int):
        if not 0 <= n <= 2 * m:
            raise ValueError(f"n={n} outside [0, {2 * m}]")
        size = comb(2 * m, n)
        if size > ITERATIVE_LIMIT:
            raise ValueError(f"basis dimension {size} exceeds {ITERATIVE_LIMIT}")
        self.m, self.n = m, n
        self.determinants = np.array(
            sorted(sum(1 << p for p in occ) for occ in combinations(range(2 * m), n)), dtype=np.int64
        )
        self.index = {int(w): i for i, w in enumerate(self.determinants)}

    def __len__(self) -> int:
        return self.determinants.size


def _parity_below(words: np.ndarray, p: int) -> np.ndarray:
    """(-1)^(number of occupied orbitals with index < p)."""
    return 1 - 2 * (np.bitwise_count(words & ((1 << p) - 1)).astype(np.int64) & 1)


def apply_ladders(words: np.ndarray, factors) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Apply a product of ladder operators (written left to right) to each word.

    Returns (new_words, signs, alive) where alive marks non-vanishing results.
    """
    out = words.copy()
    sign = np.ones(words.size, dtype=np.int64)
    alive = np.ones(words.size, dtype=bool)
    for p, dagger in reversed(factors):
        bit = 1 << p
        occ = (out & bit) != 0
        alive &= ~occ if dagger else occ
        sign *= _parity_below(out, p)
        out = out ^ bit
    return out, sign, alive


def _one_body_terms(spec: RouthianSpec):
    n = spec.num_qubits
    h = -spec.omega * np.asarray(spec.jx)
    h = h + np.diag(spec.orbital_energies)
    for p in range(n):
        for q in range(n):
            if h[p, q] != 0.0:
                yield h[p, q], ((p, True), (q, False))


def _pair_terms(spec: RouthianSpec):
    if spec.g == 0.0:
        return
    for k in range(spec.active.m):
        for l in range(spec.active.m):
            yield -spec.g, ((2 * k, True), (2 * k + 1, True), (2 * l + 1, False), (2 * l, False))


def _assemble(words: np.ndarray, terms, index_of) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for coeff, factors in terms:
        new, sign, alive = apply_ladders(words, factors)
        src = np.flatnonzero(alive)
        rows.append(index_of(new[src]))
        cols.append(src)
        vals.append(coeff * sign[src])
    dim = words.size
    if not rows:
        return sp.csr_matrix((dim, dim))
    vals = np.concatenate(vals)
    mat = sp.coo_matrix((vals, (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    return mat.tocsr()


def routhian_matrix(spec: RouthianSpec, basis: FixedNBasis | None = None) -> sp.csr_matrix:
    """H' in the fixed-n_act determinant basis (the penalty vanishes there)."""
    basis = basis or FixedNBasis(spec.active.m, spec.active.n_act)
    if basis.m != spec.active.m or basis.n != spec.active.n_act:
        raise ValueError("basis does not match the Routhian's active space")
    words = basis.determinants
    index_of = lambda w: np.searchsorted(words, w)
    terms = list(_one_body_terms(spec)) + list(_pair_terms(spec))
    mat = _assemble(words, terms, index_of)
    if np.iscomplexobj(mat.data) and np.max(np.abs(mat.data.imag), initial=0.0) < 1e-14:
        mat = mat.real.tocsr()
    return mat


def full_space_matrix(spec: RouthianSpec) -> np.ndarray:
    """Dense H' over all 2^(2m) occupations, particle-number penalty included."""
    n = spec.num_qubits
    if n > 12:
        raise ValueError("full-space matrix limited to 12 spin orbitals")
    words = np.arange(1 << n, dtype=np.int64)
    terms = list(_one_body_terms(spec)) + list(_pair_terms(spec))
    mat = _assemble(words, terms, lambda w: w).toarray()
    nvec = np.bitwise_count(words).astype(float)
    mat += np.diag(spec.lambda_p * (nvec - spec.active.n_act) ** 2)
    return mat


def _lowest(mat: sp.spmatrix) -> tuple[float, np.ndarray]:
    dim = mat.shape[0]
    if dim <= DENSE_LIMIT:
        vals, vecs = np.linalg.eigh(mat.toarray())
        return float(vals[0]), vecs[:, 0]
    # fixed start vector keeps the iteration deterministic
    v0 = np.ones(dim) / math.sqrt(dim)
    vals, vecs = eigsh(mat, k=1, which="SA", v0=v0, tol=1e-13, maxiter=20 * dim)
    return float(vals[0]), vecs[:, 0]


def exact_ground(spec: RouthianSpec) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of H' in the fixed-n_act sector (vector in basis order)."""
    mat = routhian_matrix(spec)
    if np.max(abs(mat - mat.getH())) > 1e-12:
        raise ArithmeticError("Routhian matrix is not Hermitian")
    return _lowest(mat)


def pair_basis(m: int, n_pairs: int) -> np.ndarray:
    if not 0 <= n_pairs <= m:
        raise ValueError(f"n_pairs={n_pairs} outside [0, {m}]")
    return np.array(sorted(sum(1 << k for k in occ) for occ in combinations(range(m), n_pairs)),
                    dtype=np.int64)


def pair_hamiltonian(m: int, n_pairs: int, g: float, energies) -> np.ndarray:
    """Seniority-zero block: 2 e_k per occupied pair, -G for every pair hop and k = l."""
    energies = np.asarray(energies, dtype=float)
    if energies.shape != (m,):
        raise ValueError("need one energy per level")
    if comb(m, n_pairs) > DENSE_LIMIT:
        raise ValueError("pair space too large for the dense solver")
    words = pair_basis(m, n_pairs)
    index = {int(w): i for i, w in enumerate(words)}
    dim = words.size
    mat = np.zeros((dim, dim))
    for i, w in enumerate(words):
        occ = [k for k in range(m) if w >> k & 1]
        mat[i, i] = 2.0 * energies[occ].sum() - g * len(occ)
        for l in occ:
            for k in range(m):
                if not w >> k & 1:
                    mat[index[int(w ^ (1 << l) ^ (1 << k))], i] += -g
    return mat


def exact_pair_ground(m: int, n_pairs: int, g: float, energies) -> float:
    return float(np.linalg.eigvalsh(pair_hamiltonian(m, n_pairs, g, energies))[0])


def gap_equation_solve(energies, n_particles: float, g: float, tol: float = 1e-13,
                       max_gap: float = 100.0) -> tuple[float, float]:
    """omega = 0 BCS by nested bisection: returns (Delta, lambda).

    lambda solves sum_k (1 - (e_k - lambda)/E_k) = N at each trial Delta and
    Delta solves (G/2) sum_k 1/E_k = 1; Delta = 0 if no root above 1e-6 exists.
    """
    e = np.asarray(energies, dtype=float)

    def number(lam, gap):
        if gap == 0.0:
            return float(np.sum(2.0 * (e < lam)))
        ek = np.sqrt((e - lam) ** 2 + gap * gap)
        return float(np.sum(1.0 - (e - lam) / ek))

    def solve_lambda(gap):
        lo, hi = e.min() - 50.0 - max_gap, e.max() + 50.0 + max_gap
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if number(mid, gap) < n_particles:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def residual(gap):
        lam = solve_lambda(gap)
        return 0.5 * g * float(np.sum(1.0 / np.sqrt((e - lam) ** 2 + gap * gap))) - 1.0, lam

    # below ~1e-6 the particle number is flat in lambda to machine precision
    # across the Fermi gap, so lambda (and the residual) would be arbitrary
    lo, hi = 1e-6, max_gap
    r_lo, lam_lo = residual(lo)
    if r_lo <= 0 or g == 0.0:
        return 0.0, lam_lo
    if residual(hi)[0] > 0:
        raise ValueError(f"gap exceeds {max_gap} MeV")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if residual(mid)[0] > 0:
            lo = mid
        else:
            hi = mid
    gap = 0.5 * (lo + hi)
    return gap, solve_lambda(gap)
