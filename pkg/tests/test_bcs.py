from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cranked_vqe.bcs import (
    calibrate_g,
    degenerate_gap,
    quasiparticle_matrix,
    solve_bcs,
    solve_paired,
    solve_unpaired,
)
from cranked_vqe.oracle import gap_equation_solve

from conftest import window


@pytest.mark.parametrize("m,delta,g", [(4, 0.25, 0.9), (6, -0.2, 0.7), (8, 0.3, 0.52), (8, 0.0, 0.6)])
def test_omega_zero_matches_gap_equation(m, delta, g):
    active, jx = window(m, delta)
    sol = solve_paired(active, g, 0.0, jx)
    gap, lam = gap_equation_solve(active.energies - active.lambda_f, active.n_act, g)
    assert sol.converged
    assert sol.gap == pytest.approx(gap, abs=1e-8)
    assert sol.lam == pytest.approx(lam, abs=1e-8)
    assert sol.particle_number == pytest.approx(active.n_act, abs=1e-9)


@pytest.mark.parametrize("m", [2, 4, 6])
def test_degenerate_levels_closed_form(m):
    active, _ = window(m)
    flat = replace(active, levels=tuple(replace(lv, energy=0.0) for lv in active.levels), lambda_f=0.0)
    g = 0.3
    sol = solve_paired(flat, g, 0.0, None)
    assert sol.gap == pytest.approx(degenerate_gap(g, m), abs=1e-8)


def test_calibrate_round_trip():
    actives = [window(8, 0.3, a=a, species=s)[0] for a in (80, 84) for s in ("proton", "neutron")]
    g0 = 0.47
    ref = float(np.mean([solve_paired(a, g0, 0.0, None).gap for a in actives]))
    assert calibrate_g(ref, actives) == pytest.approx(g0, abs=1e-4)
    with pytest.raises(ValueError):
        calibrate_g(-1.0, actives)
    with pytest.raises(ValueError):
        calibrate_g(1.0, [])


@settings(max_examples=20, deadline=None)
@given(gap=st.floats(0.0, 3.0), lam=st.floats(-2.0, 2.0), omega=st.floats(0.0, 1.0))
def test_quasiparticle_spectrum_is_symmetric(gap, lam, omega):
    active, jx = window(4, 0.2)
    h = np.diag(np.repeat(active.energies - active.lambda_f, 2)) - omega * jx
    e = np.linalg.eigvalsh(quasiparticle_matrix(h, gap, lam))
    assert np.allclose(np.sort(e), np.sort(-e), atol=1e-10)


@pytest.mark.parametrize("omega", [0.0, 0.4, 1.0])
def test_cranked_solution_properties(omega):
    active, jx = window(8, 0.25)
    sol = solve_bcs(active, 0.52, omega, jx)
    assert sol.converged
    assert sol.particle_number == pytest.approx(active.n_act, abs=1e-8)
    assert sol.routhian <= sol.other_routhian
    assert sol.branch in ("paired", "collapsed")
    rho = sol.rho
    assert np.allclose(rho, rho.T, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(rho) > -1e-10) and np.all(np.linalg.eigvalsh(rho) < 1 + 1e-10)
    if omega == 0.0:
        assert abs(sol.jx) < 1e-8


def test_unpaired_branch_and_zero_g():
    active, jx = window(6, -0.3)
    sol = solve_unpaired(active, 0.5, jx)
    h = np.diag(np.repeat(active.energies - active.lambda_f, 2)) - 0.5 * jx
    e = np.linalg.eigvalsh(h)
    assert sol.routhian == pytest.approx(e[: active.n_act].sum())
    assert sol.gap == 0.0 and sol.branch == "collapsed"
    assert solve_bcs(active, 0.0, 0.5, jx).gap == 0.0
    with pytest.raises(ValueError):
        solve_bcs(active, -0.1, 0.0, jx)
