"""Structured number-conserving ansatz: pair-transfer doubles + j_x singles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .active_space import ActiveSpace
from .operators import PauliSum
from .statevector import (
    SectorSimulator,
    StateVector,
    apply_pair_excitation,
    apply_single_excitation,
    expectation,
    prepare_reference,
    reference_occupation,
)

JX_THRESHOLD = 1e-8


@dataclass(frozen=True)
class ExcitationGraph:
    doubles: tuple[tuple[int, int], ...]
    singles: tuple[tuple[int, int], ...]

    @property
    def n_params(self) -> int:
        return len(self.doubles) + len(self.singles)


def build_graph(active: ActiveSpace, jx: np.ndarray, jx_threshold: float = JX_THRESHOLD,
                include_singles: bool = True) -> ExcitationGraph:
    """Complete pair-transfer graph plus the nonzero-coupling j_x graph."""
    jx = np.asarray(jx)
    if np.max(np.abs(jx - jx.conj().T), initial=0.0) > 1e-10:
        raise ValueError("jx must be Hermitian")
    m = active.m
    doubles = tuple((k, l) for k in range(m) for l in range(k + 1, m))
    singles = ()
    if include_singles:
        n = 2 * m
        singles = tuple(
            (p, q) for p in range(n) for q in range(p + 1, n) if abs(jx[p, q]) > jx_threshold
        )
    return ExcitationGraph(doubles, singles)


@dataclass
class AnsatzProgram:
    """Gate sequence: all doubles (k, l) lexicographic, then all singles (p, q)."""

    graph: ExcitationGraph
    active: ActiveSpace
    parameters: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.parameters is None:
            self.parameters = np.zeros(self.n_params)
        self.parameters = np.asarray(self.parameters, dtype=float)
        if self.parameters.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {self.parameters.shape}")

    @property
    def n_params(self) -> int:
        return self.graph.n_params

    def gates(self) -> list[tuple[str, int, int]]:
        return [("pair", k, l) for k, l in self.graph.doubles] + [
            ("single", p, q) for p, q in self.graph.singles
        ]

    def _check(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {params.shape}")
        return params

    def state(self, params=None) -> StateVector:
        """Dense statevector of the ansatz at ``params``."""
        params = self._check(self.parameters if params is None else params)
        psi = prepare_reference(self.active)
        for (kind, a, b), angle in zip(self.gates(), params):
            if kind == "pair":
                psi = apply_pair_excitation(psi, a, b, angle)
            else:
                psi = apply_single_excitation(psi, a, b, angle)
        return psi


def energy(params, program: AnsatzProgram, h: PauliSum, active: ActiveSpace | None = None) -> float:
    """<ref| U^+ h U |ref> on the dense statevector."""
    if active is not None and active.num_qubits != h.num_qubits:
        raise ValueError("Hamiltonian and active space sizes differ")
    if h.num_qubits != program.active.num_qubits:
        raise ValueError("Hamiltonian and ansatz register sizes differ")
    return expectation(program.state(params), h)


class CompiledAnsatz:
    """Fast objective: the ansatz evaluated on the fixed-N sector slice.

    Gives the same energies as :func:`energy` (the sector holds every
    nonzero amplitude) at a fraction of the cost.  Real Hamiltonians use the
    compiled kernels; complex ones fall back to numpy.
    """

    def __init__(self, program: AnsatzProgram, h: PauliSum | None = None,
                 sim: SectorSimulator | None = None):
        self.program = program
        active = program.active
        self.sim = sim or SectorSimulator(active.num_qubits, active.n_act)
        if self.sim.n != active.n_act or self.sim.num_qubits != active.num_qubits:
            raise ValueError("sector simulator does not match the active space")
        self.ref = self.sim.reference(reference_occupation(active))
        src, dst, sign, offsets = [], [], [], [0]
        for kind, a, b in program.gates():
            if kind == "pair":
                s_, d_ = self.sim.pair_pairs(a, b)
                g_ = np.full(s_.size, -1.0)
            else:
                s_, d_, g_ = self.sim.single_pairs(a, b)
            src.append(s_)
            dst.append(d_)
            sign.append(g_)
            offsets.append(offsets[-1] + s_.size)
        self.n_params = program.n_params
        cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)
        self._src = cat(src, np.int64)
        self._dst = cat(dst, np.int64)
        self._sign = cat(sign, float)
        self._offsets = np.array(offsets, dtype=np.int64)
        self.matrix = None
        if h is not None:
            self.set_hamiltonian(h)

    def set_hamiltonian(self, h) -> None:
        """Accepts a PauliSum or an already compiled sector matrix."""
        self.matrix = self.sim.compile(h) if isinstance(h, PauliSum) else h.tocsr()
        self._real = not np.iscomplexobj(self.matrix.data)

    def _params(self, params) -> np.ndarray:
        params = np.ascontiguousarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {params.shape}")
        return params

    def _apply(self, vec, params, start=0):
        if vec.dtype == float:
            _kernels.apply_rotations(vec, self._src, self._dst, self._sign, self._offsets, params, start)
            return
        for g in range(start, params.size):
            lo, hi = self._offsets[g], self._offsets[g + 1]
            c, s = np.cos(params[g] / 2), np.sin(params[g] / 2)
            src, dst = self._src[lo:hi], self._dst[lo:hi]
            a, b = vec[src], vec[dst]
            ss = s * self._sign[lo:hi]
            vec[src] = c * a - ss * b
            vec[dst] = ss * a + c * b

    def _form(self, vec) -> float:
        if self._real:
            m = self.matrix
            return float(_kernels.quadratic_form(m.indptr, m.indices, m.data, vec))
        return float(np.real(np.vdot(vec, self.matrix @ vec)))

    def sector_state(self, params) -> np.ndarray:
        params = self._params(params)
        real = self.matrix is None or self._real
        vec = self.ref.astype(float if real else complex)
        self._apply(vec, params)
        return vec

    def energy(self, params) -> float:
        return self._form(self.sector_state(params))

    def central_gradient(self, params, step: float) -> np.ndarray:
        """Central differences (E(x + h e_j) - E(x - h e_j)) / 2h.

        Every stencil value equals a from-scratch ``energy`` call bit for bit;
        the gates before j are shared between the two stencil points.
        """
        params = self._params(params)
        prefix = self.sector_state(np.zeros(self.n_params))
        grad = np.empty(self.n_params)
        shifted = params.copy()
        for j in range(self.n_params):
            vals = []
            for h in (step, -step):
                shifted[j] = params[j] + h
                work = prefix.copy()
                self._apply(work, shifted, start=j)
                vals.append(self._form(work))
            shifted[j] = params[j]
            grad[j] = (vals[0] - vals[1]) / (2.0 * step)
            self._apply(prefix, params[: j + 1], start=j)
        return grad

    def state(self, params) -> StateVector:
        return self.sim.embed(self.sector_state(params))
