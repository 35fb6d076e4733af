"""Quasi-Newton minimization of the ansatz energy, warm starts and multistart."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .ansatz import AnsatzProgram, CompiledAnsatz
from .operators import PauliSum


@dataclass(frozen=True)
class OptimizerSettings:
    max_iter: int = 500
    tol_energy: float = 1e-10
    tol_grad: float = 1e-8
    fd_step: float = 1e-6
    bound: float = 2.0 * math.pi
    multistart: int = 0
    sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1 or self.fd_step <= 0 or self.bound <= 0:
            raise ValueError("max_iter, fd_step and bound must be positive")
        if self.tol_energy < 0 or self.tol_grad < 0 or self.sigma < 0 or self.multistart < 0:
            raise ValueError("tolerances, sigma and multistart must be non-negative")


@dataclass
class VqeResult:
    energy: float
    parameters: np.ndarray
    n_fev: int
    n_it: int
    last_step: float
    converged: bool
    message: str = ""
    history: list[float] = field(default_factory=list, repr=False)


class NonFiniteObjective(ArithmeticError):
    pass


class _Stop(StopIteration):
    pass


def _as_compiled(program, h) -> CompiledAnsatz:
    if isinstance(program, CompiledAnsatz):
        if h is not None:
            program.set_hamiltonian(h)
        if program.matrix is None:
            raise ValueError("compiled ansatz has no Hamiltonian")
        return program
    if h is None:
        raise ValueError("a Hamiltonian is required")
    return CompiledAnsatz(program, h)


def minimize(program: AnsatzProgram | CompiledAnsatz, h: PauliSum | None = None, init=None,
             settings: OptimizerSettings | None = None,
             on_iterate: Callable[[np.ndarray], None] | None = None) -> VqeResult:
    """L-BFGS-B on the ansatz energy with central finite-difference gradients.

    n_fev counts every objective evaluation, stencil points included.  The run
    stops once an iteration changes the energy by less than tol_energy, the
    projected gradient drops below tol_grad, or max_iter is reached.
    """
    settings = settings or OptimizerSettings()
    obj = _as_compiled(program, h)
    x0 = np.zeros(obj.n_params) if init is None else np.array(init, dtype=float)
    if x0.shape != (obj.n_params,):
        raise ValueError(f"expected {obj.n_params} initial angles, got {x0.shape}")
    x0 = np.clip(x0, -settings.bound, settings.bound)

    e0 = obj.energy(x0)
    if not math.isfinite(e0):
        raise NonFiniteObjective(f"initial energy is {e0}")
    counts = {"fev": 1}
    best = {"x": x0.copy(), "e": e0}
    history = [e0]
    state = {"last_step": math.inf, "stopped": False}

    def fun(x):
        e = obj.energy(x)
        g = obj.central_gradient(x, settings.fd_step)
        counts["fev"] += 1 + 2 * x.size
        if not (math.isfinite(e) and np.all(np.isfinite(g))):
            raise NonFiniteObjective(f"objective not finite at iterate {len(history)}")
        if e < best["e"]:
            best["x"], best["e"] = x.copy(), e
        return e, g

    def callback(intermediate_result):
        e = float(intermediate_result.fun)
        state["last_step"] = abs(e - history[-1])
        history.append(e)
        if on_iterate is not None:
            on_iterate(np.array(intermediate_result.x))
        if state["last_step"] < settings.tol_energy:
            state["stopped"] = True
            raise _Stop

    if obj.n_params == 0:
        return VqeResult(e0, x0, 1, 0, 0.0, True, "no parameters", history)

    res = _scipy_minimize(
        fun, x0, jac=True, method="L-BFGS-B",
        bounds=[(-settings.bound, settings.bound)] * obj.n_params,
        callback=callback,
        options={"maxiter": settings.max_iter, "gtol": settings.tol_grad, "ftol": 0.0,
                 "maxcor": 20, "maxls": 40},
    )
    x = np.array(res.x)
    energy = obj.energy(x)
    counts["fev"] += 1
    # scipy returns its final iterate; keep the best point actually visited
    if best["e"] < energy:
        x, energy = best["x"], best["e"]
    grad_small = bool(res.status == 0 and not state["stopped"])
    converged = state["stopped"] or grad_small
    return VqeResult(
        energy=float(energy),
        parameters=x,
        n_fev=counts["fev"],
        n_it=int(res.nit),
        last_step=float(state["last_step"]) if len(history) > 1 else 0.0,
        converged=bool(converged),
        message=str(res.message),
        history=history,
    )


class WarmStartError(RuntimeError):
    def __init__(self, omega: float, cause: Exception):
        super().__init__(f"minimization failed at omega={omega:g} MeV: {cause}")
        self.omega = omega


def warm_start_sequence(compiled: CompiledAnsatz, hamiltonian_at: Callable[[float], object],
                        omega_mesh: Sequence[float], settings: OptimizerSettings | None = None,
                        init=None) -> list[VqeResult]:
    """Minimize along an ascending omega mesh, seeding each point with the previous optimum.

    ``hamiltonian_at(omega)`` returns a PauliSum or compiled sector matrix.
    """
    omegas = [float(w) for w in omega_mesh]
    if any(b <= a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("omega mesh must be strictly ascending")
    results = []
    x = None if init is None else np.asarray(init, dtype=float)
    for w in omegas:
        compiled.set_hamiltonian(hamiltonian_at(w))
        try:
            r = minimize(compiled, None, x, settings)
        except (NonFiniteObjective, ValueError) as exc:
            raise WarmStartError(w, exc) from exc
        results.append(r)
        x = r.parameters
    return results


@dataclass
class MultistartReport:
    results: list[VqeResult]
    inits: list[np.ndarray]

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.results])

    @property
    def best(self) -> VqeResult:
        return self.results[int(np.argmin(self.energies))]

    @property
    def spread(self) -> float:
        """max - min final energy over all starts (MeV)."""
        e = self.energies
        return float(e.max() - e.min())


def multistart(program: AnsatzProgram | CompiledAnsatz, h: PauliSum | None, reference_init,
               n_random: int, sigma: float = 0.1, seed: int = 0,
               settings: OptimizerSettings | None = None) -> MultistartReport:
    """Reference start plus n_random Gaussian perturbations of it."""
    if n_random < 0:
        raise ValueError("n_random must be >= 0")
    obj = _as_compiled(program, h)
    ref = np.zeros(obj.n_params) if reference_init is None else np.asarray(reference_init, float)
    rng = np.random.default_rng(seed)
    inits = [ref.copy()] + [ref + rng.normal(0.0, sigma, ref.size) for _ in range(n_random)]
    results = [minimize(obj, None, x, settings) for x in inits]
    return MultistartReport(results, inits)
