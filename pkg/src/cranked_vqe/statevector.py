"""Exact statevector simulation of number-conserving excitation gates.

Basis index bit p holds the occupation of spin orbital / qubit p.

Gate conventions (fixed here and checked against dense matrix exponentials
of the JW-mapped generators in the test suite):

* single excitation  U_S(phi) = exp[(phi/2)(a_p^+ a_q - a_q^+ a_p)]
* pair transfer      U_D(theta) = exp[(theta/2)(a_p^+ a_q^+ a_s a_r - h.c.)]
  with (p, q, r, s) = (k+, k-, l-, l+), i.e. generator P_l^+ P_k - P_k^+ P_l.

Both act as Givens rotations on two-dimensional invariant subspaces, so they
are applied exactly rather than through Pauli exponentials.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np
import scipy.sparse as sp

from .active_space import ActiveSpace
from .operators import PauliSum, _I_POW, _popcount

MAX_QUBITS = 20


class StateVector:
    def __init__(self, amplitudes: np.ndarray, num_qubits: int | None = None):
        amps = np.asarray(amplitudes, dtype=complex)
        n = int(round(np.log2(amps.size))) if num_qubits is None else num_qubits
        if amps.shape != (1 << n,):
            raise ValueError(f"expected {1 << n} amplitudes, got shape {amps.shape}")
        if n > MAX_QUBITS:
            raise ValueError(f"{n} qubits exceeds the dense limit of {MAX_QUBITS}")
        self.amplitudes = amps
        self.num_qubits = n

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.num_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @classmethod
    def basis_state(cls, num_qubits: int, occupied) -> "StateVector":
        amps = np.zeros(1 << num_qubits, dtype=complex)
        amps[sum(1 << p for p in occupied)] = 1.0
        return cls(amps, num_qubits)

    def bitstring(self, index: int) -> str:
        return "".join(str((index >> q) & 1) for q in range(self.num_qubits))


def reference_occupation(active: ActiveSpace) -> list[int]:
    if active.n_act % 2 or active.n_act > 2 * active.m:
        raise ValueError(f"n_act={active.n_act} invalid for reference preparation")
    return list(range(active.n_act))


def prepare_reference(active: ActiveSpace) -> StateVector:
    """Lowest n_act/2 pair orbitals filled: qubits 0 .. n_act-1 set."""
    return StateVector.basis_state(active.num_qubits, reference_occupation(active))


def _check_qubits(n: int, *qubits: int):
    for q in qubits:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n} qubits")


@lru_cache(maxsize=256)
def _single_pairs_dense(n: int, p: int, q: int):
    idx = np.arange(1 << n)
    src = idx[((idx >> q) & 1 == 1) & ((idx >> p) & 1 == 0)]
    dst = src ^ ((1 << p) | (1 << q))
    return src, dst, _hop_sign(src, p, q)


def _hop_sign(words: np.ndarray, p: int, q: int) -> np.ndarray:
    lo, hi = min(p, q), max(p, q)
    between = ((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1)
    return 1.0 - 2.0 * (np.bitwise_count(words & between) & 1)


@lru_cache(maxsize=256)
def _pair_pairs_dense(n: int, k: int, l: int):
    idx = np.arange(1 << n)
    mk, ml = 3 << (2 * k), 3 << (2 * l)
    src = idx[((idx & ml) == ml) & ((idx & mk) == 0)]
    return src, src ^ mk ^ ml


def _rotate(amps: np.ndarray, src, dst, sign, angle: float) -> None:
    """In place: |src> -> c|src> + s*sign|dst>, |dst> -> c|dst> - s*sign|src>."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    a, b = amps[src], amps[dst]
    ss = s * sign
    amps[src] = c * a - ss * b
    amps[dst] = ss * a + c * b


def apply_single_excitation(state: StateVector, p: int, q: int, phi: float) -> StateVector:
    """exp[(phi/2)(a_p^+ a_q - a_q^+ a_p)] applied exactly."""
    if p == q:
        raise ValueError("single excitation needs p != q")
    _check_qubits(state.num_qubits, p, q)
    out = state.copy()
    src, dst, sign = _single_pairs_dense(state.num_qubits, p, q)
    _rotate(out.amplitudes, src, dst, sign, phi)
    return out


def apply_pair_excitation(state: StateVector, k: int, l: int, theta: float) -> StateVector:
    """Pair transfer between levels k and l (qubits 2k, 2k+1, 2l, 2l+1)."""
    if k == l:
        raise ValueError("pair excitation needs k != l")
    _check_qubits(state.num_qubits, 2 * k + 1, 2 * l + 1, 2 * k, 2 * l)
    out = state.copy()
    src, dst = _pair_pairs_dense(state.num_qubits, k, l)
    # generator maps pair-at-l (src) to -pair-at-k (dst)
    _rotate(out.amplitudes, src, dst, -1.0, theta)
    return out


def expectation_value(state: StateVector, op: PauliSum) -> complex:
    """<psi|op|psi> for any Pauli sum, summed over the support of psi."""
    if op.num_qubits != state.num_qubits:
        raise ValueError("operator and state qubit counts differ")
    amps = state.amplitudes
    support = np.flatnonzero(amps)
    psi = amps[support]
    total = 0.0 + 0.0j
    by_flip: dict[int, list] = {}
    for (x, z), c in op.terms.items():
        by_flip.setdefault(x, []).append((z, c * _I_POW[_popcount(x & z) % 4]))
    for x in sorted(by_flip):
        overlap = np.conj(amps[support ^ x]) * psi
        for z, c in sorted(by_flip[x], key=lambda t: t[0]):
            signs = 1.0 - 2.0 * (np.bitwise_count(support & z) & 1)
            total += c * np.sum(overlap * signs)
    return complex(total)


def expectation(state: StateVector, op: PauliSum) -> float:
    if not op.is_hermitian():
        raise ValueError("expectation requires a Hermitian Pauli sum (real coefficients)")
    val = expectation_value(state, op)
    if abs(val.imag) > 1e-10:
        raise ArithmeticError(f"imaginary residue {val.imag:.3e} in Hermitian expectation")
    return val.real


@lru_cache(maxsize=32)
def fixed_number_words(num_qubits: int, n: int) -> np.ndarray:
    """All occupation words with popcount n in ascending (lexicographic) order."""
    if not 0 <= n <= num_qubits:
        raise ValueError(f"particle number {n} outside [0, {num_qubits}]")
    words = np.fromiter(
        (sum(1 << p for p in occ) for occ in combinations(range(num_qubits), n)),
        dtype=np.int64,
        count=comb(num_qubits, n),
    )
    words.sort()
    return words


class SectorSimulator:
    """The statevector restricted to its fixed-particle-number support.

    Number-conserving gates never leave the sector, so the amplitudes outside
    it are structural zeros.  Amplitudes and operators are kept real whenever
    the inputs are real.
    """

    def __init__(self, num_qubits: int, n: int):
        self.num_qubits = num_qubits
        self.n = n
        self.words = fixed_number_words(num_qubits, n)
        self.dim = self.words.size
        self._single: dict = {}
        self._pair: dict = {}

    def positions(self, words: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.words, words)
        if np.any(pos >= self.dim) or np.any(self.words[np.minimum(pos, self.dim - 1)] != words):
            raise ValueError("word outside the particle-number sector")
        return pos

    def reference(self, occupied) -> np.ndarray:
        vec = np.zeros(self.dim)
        vec[self.positions(np.array([sum(1 << p for p in occupied)]))] = 1.0
        return vec

    def single_pairs(self, p: int, q: int):
        key = (p, q)
        if key not in self._single:
            w = self.words
            src = w[((w >> q) & 1 == 1) & ((w >> p) & 1 == 0)]
            dst = src ^ ((1 << p) | (1 << q))
            self._single[key] = (self.positions(src), self.positions(dst), _hop_sign(src, p, q))
        return self._single[key]

    def pair_pairs(self, k: int, l: int):
        key = (k, l)
        if key not in self._pair:
            w = self.words
            mk, ml = 3 << (2 * k), 3 << (2 * l)
            src = w[((w & ml) == ml) & ((w & mk) == 0)]
            self._pair[key] = (self.positions(src), self.positions(src ^ mk ^ ml))
        return self._pair[key]

    def apply_single(self, vec: np.ndarray, p: int, q: int, phi: float) -> None:
        src, dst, sign = self.single_pairs(p, q)
        _rotate(vec, src, dst, sign, phi)

    def apply_pair(self, vec: np.ndarray, k: int, l: int, theta: float) -> None:
        src, dst = self.pair_pairs(k, l)
        _rotate(vec, src, dst, -1.0, theta)

    def compile(self, op: PauliSum) -> sp.csr_matrix:
        """Sector block of a number-conserving Pauli sum as a sparse matrix."""
        if op.num_qubits != self.num_qubits:
            raise ValueError("operator and sector qubit counts differ")
        rows, cols, vals = [], [], []
        w = self.words
        for (x, z), c in op.terms.items():
            tgt = w ^ x
            keep = np.bitwise_count(tgt) == self.n
            if not np.any(keep):
                continue
            src = np.flatnonzero(keep)
            signs = 1.0 - 2.0 * (np.bitwise_count(w[src] & z) & 1)
            rows.append(self.positions(tgt[src]))
            cols.append(src)
            vals.append(c * _I_POW[_popcount(x & z) % 4] * signs)
        if not rows:
            return sp.csr_matrix((self.dim, self.dim))
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.dim, self.dim),
        ).tocsr()
        mat.sum_duplicates()
        mat.data[np.abs(mat.data) < 1e-13] = 0.0
        mat.eliminate_zeros()
        if np.all(np.abs(mat.data.imag) < 1e-14):
            mat = mat.real.tocsr()
        mat.sort_indices()
        return mat

    def embed(self, vec: np.ndarray) -> StateVector:
        amps = np.zeros(1 << self.num_qubits, dtype=complex)
        amps[self.words] = vec
        return StateVector(amps, self.num_qubits)

    def restrict(self, state: StateVector) -> np.ndarray:
        return state.amplitudes[self.words].copy()
