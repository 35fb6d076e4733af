"""Deformed Nilsson single-particle spectrum and intrinsic-frame j_x matrix.

The one-body Hamiltonian is diagonalized shell by shell (no Delta N = 2
coupling) in the spherical oscillator basis |N l Lambda Sigma>, one block
per (N, Omega > 0).  Each eigenvector represents a Kramers pair; the
time-reversed partner is generated with T = exp(-i pi j_y) K, which keeps
all coefficients and all j_x matrix elements real.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from sympy.physics.wigner import clebsch_gordan

KAPPA_DEFAULT = (0.05, 0.05, 0.05, 0.05, 0.05, 0.0637, 0.0637, 0.06)
MU_DEFAULT = (0.0, 0.0, 0.0, 0.35, 0.625, 0.600, 0.600, 0.54)
N_MAX_LIMIT = 7
DELTA_LIMIT = 0.5


def oscillator_quantum(mass_number: float, coefficient: float = 41.0) -> float:
    """Spherical oscillator quantum hbar*omega_0 = 41 A^(-1/3) MeV."""
    if mass_number <= 0:
        raise ValueError(f"mass number must be positive, got {mass_number}")
    return coefficient * mass_number ** (-1.0 / 3.0)


def volume_factor(delta: float) -> float:
    """omega_0(delta) / omega_0 from volume conservation of the deformed oscillator."""
    arg = 1.0 - (4.0 / 3.0) * delta**2 - (16.0 / 27.0) * delta**3
    if arg <= 0:
        raise ValueError(f"deformation {delta} outside the volume-conserving domain")
    return arg ** (-1.0 / 6.0)


@dataclass(frozen=True)
class NilssonParams:
    hbar_omega0: float
    kappa_by_shell: tuple[float, ...] = KAPPA_DEFAULT
    mu_by_shell: tuple[float, ...] = MU_DEFAULT

    def __post_init__(self):
        if not self.hbar_omega0 > 0:
            raise ValueError("hbar_omega0 must be positive")
        if len(self.kappa_by_shell) != N_MAX_LIMIT + 1 or len(self.mu_by_shell) != N_MAX_LIMIT + 1:
            raise ValueError("kappa and mu must be given for shells N = 0..7")

    @classmethod
    def for_mass(cls, mass_number: float, **kwargs) -> "NilssonParams":
        return cls(hbar_omega0=oscillator_quantum(mass_number), **kwargs)


@dataclass(frozen=True, order=True)
class SphericalBasisState:
    N: int
    l: int
    Lambda: int
    Sigma: float

    def __post_init__(self):
        if self.l > self.N or (self.N - self.l) % 2:
            raise ValueError(f"invalid oscillator state N={self.N}, l={self.l}")
        if abs(self.Lambda) > self.l or self.Sigma not in (-0.5, 0.5):
            raise ValueError(f"invalid projections Lambda={self.Lambda}, Sigma={self.Sigma}")

    @property
    def Omega(self) -> float:
        return self.Lambda + self.Sigma

    @property
    def parity(self) -> int:
        return -1 if self.N % 2 else 1

    def time_reversed(self) -> tuple["SphericalBasisState", int]:
        """Partner state and phase of exp(-i pi j_y) acting on this state."""
        phase = (-1) ** int(round(self.l - self.Lambda + 0.5 - self.Sigma))
        return SphericalBasisState(self.N, self.l, -self.Lambda, -self.Sigma), phase


def _half(x: float) -> str:
    return str(Fraction(x).limit_denominator(2))


@dataclass(frozen=True)
class AsymptoticLabel:
    Omega: float
    N: int
    n_z: int
    Lambda: int

    def __str__(self) -> str:
        return f"{_half(self.Omega)}[{self.N}{self.n_z}{self.Lambda}]"


@dataclass(frozen=True)
class NilssonLevel:
    energy: float
    omega_projection: float
    parity: int
    shell: int
    states: tuple[SphericalBasisState, ...]
    eigenvector: np.ndarray
    label: AsymptoticLabel

    @property
    def two_omega(self) -> int:
        return int(round(2 * self.omega_projection))


def build_spherical_basis(N_max: int) -> list[SphericalBasisState]:
    """All oscillator states with N <= N_max, ordered by (N, l, Lambda, Sigma)."""
    if not 0 <= N_max <= N_MAX_LIMIT:
        raise ValueError(f"N_max must be in [0, {N_MAX_LIMIT}], got {N_max}")
    basis = []
    for N in range(N_max + 1):
        for l in range(N % 2, N + 1, 2):
            for lam in range(-l, l + 1):
                for sigma in (-0.5, 0.5):
                    basis.append(SphericalBasisState(N, l, lam, sigma))
    return basis


@lru_cache(maxsize=None)
def _radial_r2(N: int, l_bra: int, l_ket: int) -> float:
    """<N l_bra | r^2 | N l_ket> in oscillator-length units (radial functions positive at origin)."""
    if l_bra == l_ket:
        return N + 1.5
    lo = min(l_bra, l_ket)
    if abs(l_bra - l_ket) == 2:
        return -math.sqrt((N - lo) * (N + lo + 3))
    return 0.0


@lru_cache(maxsize=None)
def _p2(l_bra: int, l_ket: int, lam: int) -> float:
    """<l_bra lam | sqrt(4 pi / 5) Y_20 | l_ket lam>."""
    if abs(l_bra - l_ket) > 2 or abs(lam) > min(l_bra, l_ket):
        return 0.0
    cg0 = clebsch_gordan(l_ket, 2, l_bra, 0, 0, 0)
    cgm = clebsch_gordan(l_ket, 2, l_bra, lam, 0, lam)
    return math.sqrt((2 * l_ket + 1) / (2 * l_bra + 1)) * float(cg0 * cgm)


def quadrupole_element(a: SphericalBasisState, b: SphericalBasisState) -> float:
    """Dimensionless (2/3) r^2 P_2 element; its shell eigenvalues are n_z - N/3."""
    if a.N != b.N or a.Lambda != b.Lambda or a.Sigma != b.Sigma:
        return 0.0
    return (2.0 / 3.0) * _radial_r2(a.N, a.l, b.l) * _p2(a.l, b.l, a.Lambda)


def spin_orbit_element(a: SphericalBasisState, b: SphericalBasisState) -> float:
    """<a| 2 l.s |b>."""
    if a.N != b.N or a.l != b.l or a.Omega != b.Omega:
        return 0.0
    l = a.l
    if a.Lambda == b.Lambda:
        return 2.0 * a.Lambda * a.Sigma
    # l+ s- and l- s+ connect (Lambda, +1/2) <-> (Lambda + 1, -1/2)
    lo = min(a.Lambda, b.Lambda)
    return math.sqrt(l * (l + 1) - lo * (lo + 1))


def _block_states(N: int, omega: float) -> list[SphericalBasisState]:
    states = []
    for l in range(N % 2, N + 1, 2):
        for sigma in (-0.5, 0.5):
            lam = omega - sigma
            if abs(lam) <= l:
                states.append(SphericalBasisState(N, l, int(round(lam)), sigma))
    return sorted(states)


def shell_block(params: NilssonParams, delta: float, N: int, omega: float):
    """Nilsson matrix in MeV for one (N, Omega) block and its basis states."""
    states = _block_states(N, omega)
    hw0 = params.hbar_omega0
    hw = hw0 * volume_factor(delta)
    kappa = params.kappa_by_shell[N]
    mu = params.mu_by_shell[N]
    l2_shell = N * (N + 3) / 2.0
    dim = len(states)
    h = np.zeros((dim, dim))
    for i, a in enumerate(states):
        for j, b in enumerate(states):
            val = -delta * hw * quadrupole_element(a, b) - kappa * hw0 * spin_orbit_element(a, b)
            if i == j:
                val += hw * (N + 1.5) - kappa * hw0 * mu * (a.l * (a.l + 1) - l2_shell)
            h[i, j] = val
    if not np.all(np.isfinite(h)):
        raise FloatingPointError(f"non-finite Nilsson matrix element for N={N}, Omega={omega}")
    return states, h


def _fix_sign(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for col in range(out.shape[1]):
        pivot = np.argmax(np.abs(out[:, col]))
        if out[pivot, col] < 0:
            out[:, col] *= -1
    return out


def _asymptotic_labels(states, vectors, N: int, omega: float) -> list[AsymptoticLabel]:
    q = np.array([[quadrupole_element(a, b) for b in states] for a in states])
    qvals, qvecs = np.linalg.eigh(q)
    cylinder = []
    for val, vec in zip(qvals, qvecs.T):
        n_z = int(round(val + N / 3.0))
        main = states[int(np.argmax(np.abs(vec)))]
        cylinder.append(AsymptoticLabel(omega, N, n_z, abs(main.Lambda)))
    overlap = (qvecs.T @ vectors) ** 2
    rows, cols = linear_sum_assignment(-overlap)
    labels = [None] * vectors.shape[1]
    for r, c in zip(rows, cols):
        labels[c] = cylinder[r]
    return labels


def diagonalize(params: NilssonParams, delta: float, N_max: int = N_MAX_LIMIT) -> list[NilssonLevel]:
    """Nilsson levels (one per Kramers pair) sorted by energy.

    Degenerate energies are ordered by (Omega, N) so the ordering is stable.
    """
    if not abs(delta) <= DELTA_LIMIT:
        raise ValueError(f"|delta| must be <= {DELTA_LIMIT}, got {delta}")
    if not 0 <= N_max <= N_MAX_LIMIT:
        raise ValueError(f"N_max must be in [0, {N_MAX_LIMIT}], got {N_max}")
    levels = []
    for N in range(N_max + 1):
        for two_omega in range(1, 2 * N + 2, 2):
            omega = two_omega / 2.0
            states, h = shell_block(params, delta, N, omega)
            try:
                vals, vecs = np.linalg.eigh(h)
            except np.linalg.LinAlgError as exc:
                raise RuntimeError(f"eigensolver failed for N={N}, Omega={omega}") from exc
            vecs = _fix_sign(vecs)
            labels = _asymptotic_labels(states, vecs, N, omega)
            parity = -1 if N % 2 else 1
            for i, val in enumerate(vals):
                levels.append(
                    NilssonLevel(float(val), omega, parity, N, tuple(states), vecs[:, i].copy(), labels[i])
                )
    levels.sort(key=lambda lv: (round(lv.energy, 9), lv.omega_projection, lv.shell, lv.label.n_z))
    return levels


def _jx_element(a: SphericalBasisState, b: SphericalBasisState) -> float:
    """<a| j_x |b> with j_x = (j+ + j-)/2 in the uncoupled basis."""
    if a.N != b.N or a.l != b.l:
        return 0.0
    l = b.l
    val = 0.0
    if a.Sigma == b.Sigma:
        if a.Lambda == b.Lambda + 1:
            val += 0.5 * math.sqrt(l * (l + 1) - b.Lambda * (b.Lambda + 1))
        elif a.Lambda == b.Lambda - 1:
            val += 0.5 * math.sqrt(l * (l + 1) - b.Lambda * (b.Lambda - 1))
    elif a.Lambda == b.Lambda:
        # s+|-1/2> = |+1/2>, s-|+1/2> = |-1/2>
        val += 0.5
    return val


@lru_cache(maxsize=None)
def _jx_full(N_max: int) -> np.ndarray:
    basis = build_spherical_basis(N_max)
    dim = len(basis)
    jx = np.zeros((dim, dim))
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            if abs(a.Omega - b.Omega) == 1.0:
                jx[i, j] = _jx_element(a, b)
    return jx


def spin_orbital_coefficients(levels: Sequence[NilssonLevel], basis: Sequence[SphericalBasisState]) -> np.ndarray:
    """Columns (k+, k-) of each level expanded over the full spherical basis."""
    index = {st: i for i, st in enumerate(basis)}
    coeffs = np.zeros((len(basis), 2 * len(levels)))
    for k, level in enumerate(levels):
        for st, c in zip(level.states, level.eigenvector):
            if st not in index:
                raise ValueError(f"level state {st} missing from basis")
            partner, phase = st.time_reversed()
            coeffs[index[st], 2 * k] = c
            coeffs[index[partner], 2 * k + 1] = phase * c
    return coeffs


def jx_matrix(levels: Sequence[NilssonLevel], basis: Sequence[SphericalBasisState]) -> np.ndarray:
    """(j_x)_{ij} in units of hbar over spin orbitals ordered (0+, 0-, 1+, 1-, ...)."""
    N_max = max(st.N for st in basis)
    if list(basis) != build_spherical_basis(N_max):
        raise ValueError("basis must be the canonical spherical basis")
    coeffs = spin_orbital_coefficients(levels, basis)
    jx = coeffs.T @ _jx_full(N_max) @ coeffs
    if np.max(np.abs(jx - jx.T), initial=0.0) > 1e-12:
        raise ArithmeticError("j_x is not Hermitian; time-reversal phase convention broken")
    return 0.5 * (jx + jx.T)


def write_levels_csv(levels: Iterable[NilssonLevel], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "energy_MeV", "two_omega", "parity", "label"])
        for i, lv in enumerate(levels):
            writer.writerow([i, f"{lv.energy:.10f}", lv.two_omega, lv.parity, str(lv.label)])
