"""Self-consistent cranked BCS (HFB with monopole pairing) in the active space.

Spin orbital 2k is k+, 2k+1 is k-.  The quasiparticle matrix is

    [[ h - lambda,  D          ],
     [ -D,          -(h - lambda)]]

with h = diag(e - lambda_F) - omega j_x and the pairing field
D_{k+,k-} = -D_{k-,k+} = -Delta.  Delta = G sum_k kappa_{k+,k-} with
rho = V* V^T and kappa = V* U^T.  The quasiparticle vacuum is chosen per
signature block (see ``_densities``); rho and kappa come out real because
j_x is real in the time-reversal phase convention of the Nilsson basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .active_space import ActiveSpace

MIXING = 0.5
TOL = 1e-8
MAX_ITER = 500
COLLAPSE_GAP = 1e-6


@dataclass
class BcsSolution:
    gap: float
    lam: float
    routhian: float
    jx: float
    occupations: np.ndarray
    converged: bool
    branch: str
    iterations: int = 0
    particle_number: float = math.nan
    other_routhian: float = math.nan
    rho: np.ndarray = field(default=None, repr=False)


def _single_particle(active: ActiveSpace, omega: float, jx) -> np.ndarray:
    e = np.repeat(active.energies - active.lambda_f, 2)
    h = np.diag(e)
    if omega:
        jx = np.asarray(jx)
        if np.iscomplexobj(jx):
            if np.max(np.abs(jx.imag)) > 1e-12:
                raise ValueError("cranked BCS expects a real j_x matrix")
            jx = jx.real
        h = h - omega * jx
    return h


def quasiparticle_matrix(h: np.ndarray, gap: float, lam: float) -> np.ndarray:
    n = h.shape[0]
    d = np.zeros((n, n))
    for k in range(n // 2):
        d[2 * k, 2 * k + 1] = -gap
        d[2 * k + 1, 2 * k] = gap
    hl = h - lam * np.eye(n)
    return np.block([[hl, d], [-d, -hl]])


def signature_bases(active: ActiveSpace) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of the two signature sectors of the quasiparticle space.

    Rotation by pi about the cranking axis maps |k+> to e^{i pi Omega}|k-> in the
    phase convention of the Nilsson basis.  It commutes with the quasiparticle
    matrix, which therefore splits into two 2m x 2m blocks.
    """
    m = active.m
    n = 2 * m
    q_plus = np.zeros((2 * n, n), dtype=complex)
    q_minus = np.zeros((2 * n, n), dtype=complex)
    for k, lv in enumerate(active.levels):
        ph = np.exp(0.5j * np.pi * lv.two_omega)
        a, b = 2 * k, 2 * k + 1
        q_plus[[a, b], k] = (1.0, -1j * ph)
        q_plus[[n + a, n + b], m + k] = (1.0, -1j * np.conj(ph))
        q_minus[[a, b], k] = (1.0, 1j * ph)
        q_minus[[n + a, n + b], m + k] = (1.0, 1j * np.conj(ph))
    return q_plus / np.sqrt(2.0), q_minus / np.sqrt(2.0)


def _densities(h, gap, lam, bases):
    """rho and kappa of the quasiparticle vacuum.

    In each signature block the m highest solutions are taken as the
    quasiparticles.  Ordering within a block is continuous in omega and
    lambda, so the vacuum never switches number parity when a
    quasiparticle energy crosses zero.
    """
    n = h.shape[0]
    m = n // 2
    big = quasiparticle_matrix(h, gap, lam)
    cols = []
    split = np.inf
    for q in bases:
        block = q.conj().T @ big @ q
        e, w = np.linalg.eigh(0.5 * (block + block.conj().T))
        split = min(split, e[m] - e[m - 1])
        cols.append(q @ w[:, m:])
    qp = np.hstack(cols)
    u, v = qp[:n], qp[n:]
    rho = v.conj() @ v.T
    kappa = v.conj() @ u.T
    # A degenerate block boundary (spherical shells under cranking) leaves the
    # vacuum ambiguous; the real parts then average the two conjugate choices.
    imag = max(np.max(np.abs(rho.imag)), np.max(np.abs(kappa.imag)))
    if imag > 1e-7 and split > 1e-6:
        raise ArithmeticError(f"quasiparticle vacuum has complex densities ({imag:.2e})")
    return rho.real, kappa.real


def _fix_lambda(h, gap, n_target, bases, guess=0.0):
    """Chemical potential with Tr rho = n_target at fixed gap."""
    if gap == 0.0:
        # sharp filling: any lambda between the cranked levels n-1 and n
        e = np.linalg.eigvalsh(h)
        k = int(round(n_target))
        upper = e[k] if k < e.size else e[-1] + 1.0
        return 0.5 * (e[k - 1] + upper) if k > 0 else e[0] - 1.0
    f = lambda lam: np.trace(_densities(h, gap, lam, bases)[0]) - n_target
    lo, hi = guess - 2.0, guess + 2.0
    while f(lo) > 0:
        lo -= 2.0 * (guess - lo)
    while f(hi) < 0:
        hi += 2.0 * (hi - guess)
    return brentq(f, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=200)


def _finish(h, jx, rho, gap, lam, g, branch, converged, it):
    pair_energy = gap * gap / g if g > 0 else 0.0
    routhian = float(np.trace(h @ rho)) - pair_energy
    jxv = float(np.trace(np.asarray(jx).real @ rho)) if jx is not None else 0.0
    occ = 0.5 * (np.diag(rho)[0::2] + np.diag(rho)[1::2])
    return BcsSolution(
        gap=float(gap), lam=float(lam), routhian=routhian, jx=jxv,
        occupations=np.clip(occ, 0.0, 1.0), converged=bool(converged), branch=branch,
        iterations=it, particle_number=float(np.trace(rho)), rho=rho,
    )


def solve_paired(active: ActiveSpace, g: float, omega: float, jx, init_gap: float = 1.0,
                 tol: float = TOL, max_iter: int = MAX_ITER, mixing: float = MIXING) -> BcsSolution:
    """Self-consistent iteration from a finite gap seed with linear mixing.

    Stops when both the gap update and the chemical potential move by less
    than tol / 10; otherwise returns the last iterate flagged unconverged.
    """
    h = _single_particle(active, omega, jx)
    bases = signature_bases(active)
    n_target = active.n_act
    gap = max(float(init_gap), 0.0) if g > 0 else 0.0
    lam = _fix_lambda(h, gap, n_target, bases)
    converged = gap == 0.0
    it = 0
    while not converged and it < max_iter:
        it += 1
        _, kappa = _densities(h, gap, lam, bases)
        new_gap = abs(g * sum(kappa[2 * k, 2 * k + 1] for k in range(active.m)))
        mixed = (1 - mixing) * gap + mixing * new_gap
        new_lam = _fix_lambda(h, mixed, n_target, bases, lam) if mixed > 0 else lam
        step = max(abs(new_gap - gap), abs(new_lam - lam))
        gap, lam = mixed, new_lam
        converged = step < tol / 10 or gap == 0.0
    if gap == 0.0:
        return solve_unpaired(active, omega, jx)
    rho, _ = _densities(h, gap, lam, bases)
    branch = "collapsed" if gap < COLLAPSE_GAP else "paired"
    return _finish(h, jx, rho, gap, lam, g, branch, converged, it)


def solve_unpaired(active: ActiveSpace, omega: float, jx) -> BcsSolution:
    """Delta = 0: the lowest n_act cranked orbitals filled."""
    h = _single_particle(active, omega, jx)
    e, vecs = np.linalg.eigh(h)
    occ = vecs[:, : active.n_act]
    lam = _fix_lambda(h, 0.0, active.n_act, None)
    return _finish(h, jx, occ @ occ.T, 0.0, lam, 0.0, "collapsed", True, 0)


def solve_bcs(active: ActiveSpace, g: float, omega: float, jx, init_gap: float = 1.0,
              tol: float = TOL, max_iter: int = MAX_ITER) -> BcsSolution:
    """Evaluate the paired and the Delta = 0 branch and return the lower Routhian."""
    if g < 0:
        raise ValueError("g must be non-negative")
    paired = solve_paired(active, g, omega, jx, init_gap, tol, max_iter)
    unpaired = solve_unpaired(active, omega, jx)
    if paired.routhian <= unpaired.routhian:
        best, other = paired, unpaired
    else:
        best, other = unpaired, paired
    best.other_routhian = other.routhian
    return best


def degenerate_gap(g: float, m: int) -> float:
    """Closed-form gap for m degenerate levels at half filling: G m / 2."""
    return 0.5 * g * m


def calibrate_g(reference_gap: float, actives: Sequence[ActiveSpace], lo: float = 0.01,
                hi: float = 2.0, tol: float = 1e-4, max_expand: int = 8) -> float:
    """Root-find G so that the mean omega = 0 BCS gap over ``actives`` equals reference_gap."""
    if reference_gap <= 0:
        raise ValueError("reference_gap must be positive")
    if not actives:
        raise ValueError("need at least one active space")

    def mean_gap(g):
        return float(np.mean([solve_paired(a, g, 0.0, None, init_gap=max(g, 0.5)).gap for a in actives]))

    f_lo = mean_gap(lo) - reference_gap
    f_hi = mean_gap(hi) - reference_gap
    for _ in range(max_expand):
        if f_hi >= 0:
            break
        hi *= 2.0
        f_hi = mean_gap(hi) - reference_gap
    if f_lo > 0 or f_hi < 0:
        raise ValueError(
            f"gap {reference_gap} MeV not bracketed by G in [{lo}, {hi}] "
            f"(mean gaps {f_lo + reference_gap:.4f}, {f_hi + reference_gap:.4f})"
        )
    if f_lo == 0:
        return lo
    return float(brentq(lambda g: mean_gap(g) - reference_gap, lo, hi, xtol=tol * 1e-2))
