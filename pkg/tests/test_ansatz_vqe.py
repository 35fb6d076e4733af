from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.sparse as sp

from cranked_vqe.ansatz import AnsatzProgram, CompiledAnsatz, build_graph, energy
from cranked_vqe.hamiltonian import RouthianSpec, qubit_routhian
from cranked_vqe.oracle import exact_ground, exact_pair_ground
from cranked_vqe.vqe import (
    NonFiniteObjective,
    OptimizerSettings,
    WarmStartError,
    minimize,
    multistart,
    warm_start_sequence,
)

from conftest import window


def problem(m, delta=0.25, g=0.52, omega=0.5, singles=True):
    active, jx = window(m, delta)
    spec = RouthianSpec(active, g, omega, 5.0, jx)
    program = AnsatzProgram(build_graph(active, jx, include_singles=singles), active)
    return spec, program, qubit_routhian(spec)


def test_graph_counts():
    active, jx = window(8, 0.25)
    graph = build_graph(active, jx)
    assert len(graph.doubles) == 28
    n_edges = sum(1 for p in range(16) for q in range(p + 1, 16) if abs(jx[p, q]) > 1e-8)
    assert len(graph.singles) == n_edges
    assert graph.n_params == 28 + n_edges
    assert build_graph(active, jx, include_singles=False).singles == ()
    with pytest.raises(ValueError):
        build_graph(active, jx + np.triu(np.ones_like(jx), 1))


def test_program_state_is_reference_at_zero():
    spec, program, h = problem(3)
    psi = program.state()
    assert abs(psi.amplitudes[0b001111]) == 1.0
    with pytest.raises(ValueError):
        program.state(np.zeros(program.n_params + 1))


def test_compiled_energy_matches_dense(rng):
    spec, program, h = problem(4)
    compiled = CompiledAnsatz(program, h)
    for _ in range(5):
        x = rng.uniform(-np.pi, np.pi, program.n_params)
        assert compiled.energy(x) == pytest.approx(energy(x, program, h), abs=1e-11)
        assert np.allclose(compiled.state(x).amplitudes, program.state(x).amplitudes, atol=1e-13)


def test_compiled_complex_fallback(rng):
    spec, program, h = problem(3)
    compiled = CompiledAnsatz(program, h)
    x = rng.uniform(-1, 1, program.n_params)
    m = compiled.matrix.astype(complex)
    compiled.set_hamiltonian(sp.csr_matrix(m))
    assert not compiled._real
    assert compiled.energy(x) == pytest.approx(energy(x, program, h), abs=1e-11)


def test_central_gradient_is_stencil_of_energy_and_close_to_five_point(rng):
    spec, program, h = problem(4)
    compiled = CompiledAnsatz(program, h)
    x = rng.uniform(-1, 1, program.n_params)
    step = 1e-6
    grad = compiled.central_gradient(x, step)
    for j in range(program.n_params):
        e = np.eye(program.n_params)[j]
        naive = (compiled.energy(x + step * e) - compiled.energy(x - step * e)) / (2 * step)
        assert grad[j] == naive  # same floating-point operations
        hh = 1e-3
        five = (-compiled.energy(x + 2 * hh * e) + 8 * compiled.energy(x + hh * e)
                - 8 * compiled.energy(x - hh * e) + compiled.energy(x - 2 * hh * e)) / (12 * hh)
        assert grad[j] == pytest.approx(five, abs=1e-7)


def test_single_double_reaches_two_level_minimum():
    """m = 2 doubles only at omega = 0: E(theta) = a + b cos(theta) + c sin(theta)."""
    spec, program, h = problem(2, omega=0.0, singles=False)
    assert program.n_params == 1
    compiled = CompiledAnsatz(program, h)
    e = [compiled.energy(np.array([t])) for t in (0.0, np.pi, np.pi / 2)]
    a = 0.5 * (e[0] + e[1])
    b = 0.5 * (e[0] - e[1])
    c = e[2] - a
    res = minimize(compiled)
    assert res.energy == pytest.approx(a - math.hypot(b, c), abs=1e-10)
    assert res.converged


def test_doubles_only_reaches_pair_ground():
    spec, program, h = problem(3, omega=0.0, singles=False)
    res = minimize(program, h)
    a = spec.active
    ref = exact_pair_ground(3, a.n_pairs, spec.g, a.energies - a.lambda_f)
    assert res.energy == pytest.approx(ref, abs=1e-8)
    assert res.energy >= ref - 1e-10


def test_vqe_bound_and_bookkeeping():
    spec, program, h = problem(3, omega=0.8)
    res = minimize(program, h)
    exact = exact_ground(spec)[0]
    assert res.energy >= exact - 1e-10
    assert res.energy == pytest.approx(exact, abs=1e-6)
    p = program.n_params
    # initial and final evaluations plus (1 + 2P) per objective call
    assert (res.n_fev - 2) % (1 + 2 * p) == 0
    assert res.history[0] >= res.energy
    assert len(res.history) == res.n_it + 1 or res.converged


def test_minimize_returns_best_visited_and_respects_bounds():
    spec, program, h = problem(2, omega=0.3)
    s = OptimizerSettings(max_iter=3)
    res = minimize(program, h, init=np.full(program.n_params, 10.0), settings=s)
    assert np.all(np.abs(res.parameters) <= s.bound)
    assert res.energy <= min(res.history) + 1e-12


def test_nonfinite_objective_raises():
    spec, program, h = problem(2)
    compiled = CompiledAnsatz(program, h)
    bad = compiled.matrix.copy()
    bad.data[0] = np.nan
    compiled.set_hamiltonian(bad)
    with pytest.raises(NonFiniteObjective):
        minimize(compiled)
    with pytest.raises(ValueError):
        minimize(program, None)


def test_warm_start_matches_cold_on_small_case():
    spec, program, h = problem(3)
    active, jx = spec.active, spec.jx
    omegas = [0.0, 0.25, 0.5]
    compiled = CompiledAnsatz(program)
    ham = lambda w: qubit_routhian(RouthianSpec(active, spec.g, w, 5.0, jx))
    warm = warm_start_sequence(compiled, ham, omegas)
    for w, r in zip(omegas, warm):
        cold = minimize(program, ham(w))
        assert r.energy == pytest.approx(cold.energy, abs=1e-8)
    with pytest.raises(ValueError):
        warm_start_sequence(compiled, ham, [0.5, 0.2])


def test_warm_start_wraps_failures():
    spec, program, h = problem(2)
    compiled = CompiledAnsatz(program, h)
    bad = compiled.matrix.copy()
    bad.data[:] = np.inf
    with pytest.raises(WarmStartError) as info:
        warm_start_sequence(compiled, lambda w: bad, [0.0])
    assert info.value.omega == 0.0


def test_multistart_deterministic():
    spec, program, h = problem(3)
    a = multistart(program, h, None, 3, sigma=0.2, seed=7)
    b = multistart(program, h, None, 3, sigma=0.2, seed=7)
    assert len(a.results) == 4
    assert np.array_equal(a.energies, b.energies)
    assert all(np.array_equal(x, y) for x, y in zip(a.inits, b.inits))
    assert a.spread >= 0 and a.best.energy == a.energies.min()
    with pytest.raises(ValueError):
        multistart(program, h, None, -1)
