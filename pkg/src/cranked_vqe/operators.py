"""Fermionic operators, Pauli sums and the Jordan-Wigner transformation.

Pauli strings are stored in symplectic form as integer bit masks (x, z):
bit p of ``x`` marks an X or Y on qubit p, bit p of ``z`` a Z or Y.  The
Hermitian word for (x, z) is i^{|x & z|} X^x Z^z.  In printed words the
leftmost character is qubit 0.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Iterator, Mapping

import numpy as np

PRUNE = 1e-12
CREATE, ANNIHILATE = 1, 0

# i^k for k mod 4
_I_POW = (1.0, 1.0j, -1.0, -1.0j)


def _popcount(v: int) -> int:
    return bin(v).count("1")


class FermionOperator:
    """Sum of products of ladder operators.

    ``terms`` maps a tuple of (spin-orbital index, CREATE|ANNIHILATE) factors,
    read left to right, to a complex coefficient.
    """

    def __init__(self, terms: Mapping[tuple, complex] | None = None):
        self.terms: dict[tuple, complex] = {}
        for key, coeff in (terms or {}).items():
            self._add(tuple((int(i), int(a)) for i, a in key), coeff)

    @classmethod
    def term(cls, *factors: tuple[int, int], coeff: complex = 1.0) -> "FermionOperator":
        return cls({tuple(factors): coeff})

    @classmethod
    def identity(cls, coeff: complex = 1.0) -> "FermionOperator":
        return cls({(): coeff})

    def _add(self, key, coeff):
        if not np.isfinite(coeff):
            raise ValueError(f"non-finite coefficient on term {key}")
        self.terms[key] = self.terms.get(key, 0.0) + coeff

    def __add__(self, other: "FermionOperator") -> "FermionOperator":
        out = FermionOperator(self.terms)
        for key, coeff in other.terms.items():
            out._add(key, coeff)
        return out

    def __sub__(self, other: "FermionOperator") -> "FermionOperator":
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, FermionOperator):
            out = FermionOperator()
            for k1, c1 in self.terms.items():
                for k2, c2 in other.terms.items():
                    out._add(k1 + k2, c1 * c2)
            return out
        return FermionOperator({k: c * other for k, c in self.terms.items()})

    __rmul__ = __mul__

    def dagger(self) -> "FermionOperator":
        return FermionOperator(
            {tuple((i, 1 - a) for i, a in reversed(k)): np.conj(c) for k, c in self.terms.items()}
        )

    def max_index(self) -> int:
        return max((i for k in self.terms for i, _ in k), default=-1)

    def __len__(self) -> int:
        return len(self.terms)


def create(p: int) -> FermionOperator:
    return FermionOperator.term((p, CREATE))


def annihilate(p: int) -> FermionOperator:
    return FermionOperator.term((p, ANNIHILATE))


def number(p: int) -> FermionOperator:
    return FermionOperator.term((p, CREATE), (p, ANNIHILATE))


class PauliSum:
    """Weighted sum of Hermitian Pauli words on ``num_qubits`` qubits."""

    def __init__(self, num_qubits: int, terms: Mapping[tuple[int, int], complex] | None = None):
        self.num_qubits = int(num_qubits)
        self.terms: dict[tuple[int, int], complex] = {}
        for key, coeff in (terms or {}).items():
            if abs(coeff) >= PRUNE:
                self.terms[key] = complex(coeff)

    @classmethod
    def from_words(cls, words: Mapping[str, complex] | Iterable[tuple[str, complex]]) -> "PauliSum":
        items = list(words.items()) if isinstance(words, Mapping) else list(words)
        if not items:
            raise ValueError("need at least one word to infer the qubit count")
        n = len(items[0][0])
        acc: dict[tuple[int, int], complex] = defaultdict(complex)
        for word, coeff in items:
            if len(word) != n:
                raise ValueError("all words must have the same length")
            x = z = 0
            for q, ch in enumerate(word.upper()):
                if ch in "XY":
                    x |= 1 << q
                if ch in "ZY":
                    z |= 1 << q
                if ch not in "IXYZ":
                    raise ValueError(f"bad Pauli character {ch!r}")
            acc[(x, z)] += coeff
        return cls(n, acc)

    @staticmethod
    def word(x: int, z: int, n: int) -> str:
        return "".join("IXZY"[((x >> q) & 1) | (((z >> q) & 1) << 1)] for q in range(n))

    def words(self) -> dict[str, complex]:
        return {self.word(x, z, self.num_qubits): c for (x, z), c in self.terms.items()}

    def items(self) -> Iterator[tuple[tuple[int, int], complex]]:
        return iter(self.terms.items())

    def __len__(self) -> int:
        return len(self.terms)

    def _check(self, other: "PauliSum"):
        if other.num_qubits != self.num_qubits:
            raise ValueError("qubit count mismatch")

    def __add__(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        acc = defaultdict(complex, self.terms)
        for key, c in other.terms.items():
            acc[key] += c
        return PauliSum(self.num_qubits, acc)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            self._check(other)
            acc: dict[tuple[int, int], complex] = defaultdict(complex)
            for (x1, z1), c1 in self.terms.items():
                a1 = _popcount(x1 & z1)
                for (x2, z2), c2 in other.terms.items():
                    x, z = x1 ^ x2, z1 ^ z2
                    k = a1 + _popcount(x2 & z2) - _popcount(x & z) + 2 * _popcount(z1 & x2)
                    acc[(x, z)] += c1 * c2 * _I_POW[k % 4]
            return PauliSum(self.num_qubits, acc)
        return PauliSum(self.num_qubits, {k: c * other for k, c in self.terms.items()})

    __rmul__ = __mul__

    def commutator(self, other: "PauliSum") -> "PauliSum":
        return self * other - other * self

    def is_hermitian(self, tol: float = PRUNE) -> bool:
        return all(abs(c.imag) < tol for c in self.terms.values())

    def max_abs(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def dumps(self) -> str:
        lines = []
        for (x, z), c in sorted(self.terms.items()):
            lines.append(f"{c.real:+.16e}{c.imag:+.16e}j {self.word(x, z, self.num_qubits)}")
        return "\n".join(lines) + "\n"


def _jw_ladder(p: int, action: int) -> dict[tuple[int, int], complex]:
    """JW image of a_p (action 0) or a_p^dagger (action 1) in X^x Z^z form."""
    below = (1 << p) - 1
    x = 1 << p
    sign = 1.0 if action == CREATE else -1.0
    # Z_<p X_p (1 -+ Z_p) / 2
    return {(x, below): 0.5, (x, below | x): 0.5 * sign}


def jordan_wigner(op: FermionOperator, num_qubits: int) -> PauliSum:
    """Map a_p -> Z_0...Z_{p-1} (X_p + i Y_p)/2 and merge like terms."""
    if op.max_index() >= num_qubits:
        raise ValueError(f"operator index {op.max_index()} outside {num_qubits} qubits")
    acc: dict[tuple[int, int], complex] = defaultdict(complex)
    for key, coeff in op.terms.items():
        prod = {(0, 0): complex(coeff)}
        for p, action in key:
            nxt: dict[tuple[int, int], complex] = defaultdict(complex)
            for (x1, z1), c1 in prod.items():
                for (x2, z2), c2 in _jw_ladder(p, action).items():
                    # X^x1 Z^z1 X^x2 Z^z2 = (-1)^{|z1 & x2|} X^{x1^x2} Z^{z1^z2}
                    s = -1.0 if _popcount(z1 & x2) % 2 else 1.0
                    nxt[(x1 ^ x2, z1 ^ z2)] += s * c1 * c2
            prod = nxt
        for (x, z), c in prod.items():
            # X^x Z^z = (-i)^{|x & z|} * word(x, z)
            acc[(x, z)] += c * _I_POW[(-_popcount(x & z)) % 4]
    return PauliSum(num_qubits, acc)


MAX_DENSE_QUBITS = 10


def pauli_matrix(op: PauliSum, num_qubits: int | None = None) -> np.ndarray:
    """Dense 2^n x 2^n matrix; column/row index bit p is qubit p."""
    n = op.num_qubits if num_qubits is None else num_qubits
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"{n} qubits too many for a dense matrix (limit {MAX_DENSE_QUBITS})")
    if n < op.num_qubits:
        raise ValueError("num_qubits smaller than the operator register")
    dim = 1 << n
    cols = np.arange(dim)
    mat = np.zeros((dim, dim), dtype=complex)
    for (x, z), c in op.terms.items():
        signs = 1.0 - 2.0 * (np.bitwise_count(cols & z) & 1)
        mat[cols ^ x, cols] += c * _I_POW[_popcount(x & z) % 4] * signs
    return mat
