"""Command-line driver: scan, point, calibrate-g, oracle-check, sensitivity, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .ansatz import AnsatzProgram, CompiledAnsatz, build_graph
from .config import Isotope, ScanConfig, load_config
from .hamiltonian import RouthianSpec, jx_pauli, qubit_routhian
from .observables import measure
from .oracle import exact_ground, exact_pair_ground
from .scan import (
    report,
    resolve_g,
    run_scan,
    sector_problem,
    sensitivity,
    solve_bcs,
    write_outputs,
    write_sensitivity,
)
from .vqe import minimize, multistart

log = logging.getLogger("cranked_vqe")

_METHODS = {"vqe": ("vqe",), "bcs": ("bcs",), "both": ("vqe", "bcs")}


def _config(args) -> ScanConfig:
    cfg = load_config(args.config) if args.config else ScanConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.threads is not None:
        updates["threads"] = args.threads
    if args.out is not None:
        updates["out"] = args.out
    if args.method is not None:
        extra = tuple(m for m in cfg.methods if m == "exact")
        updates["methods"] = _METHODS[args.method] + extra
    return replace(cfg, **updates) if updates else cfg


def cmd_scan(args) -> int:
    cfg = _config(args)
    t0 = time.time()
    result = run_scan(cfg)
    write_outputs(result, cfg.out)
    log.info("scan finished in %.1f s; outputs in %s", time.time() - t0, cfg.out)
    print(report(cfg.out, [i.name for i in cfg.isotopes]))
    return 1 if result.failures else 0


def _point_problem(cfg, args):
    iso = Isotope.parse(args.isotope)
    active, jx = sector_problem(iso.a, iso.count(args.species), args.species, args.delta, args.m or cfg.m)
    g = resolve_g(replace(cfg, isotopes=(iso,)))[iso.name]
    return iso, active, jx, g


def cmd_point(args) -> int:
    cfg = _config(args)
    iso, active, jx, g = _point_problem(cfg, args)
    spec = RouthianSpec(active, g, args.omega, cfg.lambda_p, jx)
    h = qubit_routhian(spec)
    program = AnsatzProgram(build_graph(active, jx), active)
    compiled = CompiledAnsatz(program, h)
    out = {
        "isotope": iso.name, "species": args.species, "delta": args.delta, "omega_MeV": args.omega,
        "m": active.m, "g_MeV": g, "levels": active.labels, "n_params": program.n_params,
        "n_doubles": len(program.graph.doubles), "n_singles": len(program.graph.singles),
    }
    if "vqe" in cfg.methods:
        res = minimize(compiled, None, None, cfg.optimizer)
        obs = measure(compiled.state(res.parameters), active, g, jx_pauli(jx), res.energy)
        out["vqe"] = {
            "routhian_MeV": res.energy, "jx_hbar": obs.jx, "delta_kappa_MeV": obs.delta_kappa,
            "delta_coh_MeV": obs.delta_coh, "n_mean": obs.n_mean, "n_var": obs.n_var,
            "n_fev": res.n_fev, "n_it": res.n_it, "last_step_MeV": res.last_step,
            "converged": res.converged,
        }
        n_random = args.multistart if args.multistart is not None else cfg.optimizer.multistart
        if n_random:
            rep = multistart(compiled, None, None, n_random, cfg.optimizer.sigma, cfg.seed, cfg.optimizer)
            out["multistart"] = {
                "energies_MeV": rep.energies.tolist(),
                "spread_keV": 1e3 * rep.spread,
                "n_fev": [r.n_fev for r in rep.results],
                "last_step_MeV": [r.last_step for r in rep.results],
            }
    if "bcs" in cfg.methods:
        sol = solve_bcs(active, g, args.omega, jx)
        out["bcs"] = {"routhian_MeV": sol.routhian, "gap_MeV": sol.gap, "lambda_MeV": sol.lam,
                      "jx_hbar": sol.jx, "branch": sol.branch, "converged": bool(sol.converged)}
    if args.exact:
        out["exact_routhian_MeV"] = exact_ground(spec)[0]
    print(json.dumps(out, indent=2))
    return 0


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    cfg = replace(cfg, g=None)
    if args.isotope:
        cfg = replace(cfg, isotopes=(Isotope.parse(args.isotope),))
    for name, g in resolve_g(cfg).items():
        print(f"{name}: G = {g:.6f} MeV (reference gap {cfg.reference_gap} MeV, m = {cfg.m}, delta = 0)")
    return 0


def oracle_check(m_values=(2, 3, 4), draws: int = 3, seed: int = 0, tol: float = 1e-6) -> list[dict]:
    """VQE against exact diagonalization on small windows of the default isotopes."""
    rng = np.random.default_rng(seed)
    rows = []
    iso = Isotope.parse("84Zr")
    for m in m_values:
        for _ in range(draws):
            delta = float(rng.choice([-0.3, -0.1, 0.1, 0.3]))
            g = float(rng.uniform(0.2, 1.0))
            omega = float(rng.uniform(0.0, 1.0))
            active, jx = sector_problem(iso.a, iso.n, "neutron", delta, m)
            spec = RouthianSpec(active, g, omega, 5.0, jx)
            res = minimize(AnsatzProgram(build_graph(active, jx), active), qubit_routhian(spec))
            exact = exact_ground(spec)[0]
            doubles_only = AnsatzProgram(build_graph(active, jx, include_singles=False), active)
            spec0 = RouthianSpec(active, g, 0.0, 5.0, jx)
            res0 = minimize(doubles_only, qubit_routhian(spec0))
            pair = exact_pair_ground(m, active.n_pairs, g, active.energies - active.lambda_f)
            rows.append({
                "m": m, "delta": delta, "g": g, "omega": omega, "vqe": res.energy, "exact": exact,
                "bound_ok": res.energy >= exact - 1e-9,
                "pair_vqe": res0.energy, "pair_exact": pair,
                "pair_ok": abs(res0.energy - pair) < tol and res0.energy >= pair - 1e-9,
            })
    return rows


def cmd_oracle_check(args) -> int:
    rows = oracle_check(seed=args.seed or 0)
    bad = 0
    for r in rows:
        ok = r["bound_ok"] and r["pair_ok"]
        bad += not ok
        print(f"m={r['m']} delta={r['delta']:+.2f} G={r['g']:.3f} omega={r['omega']:.3f}: "
              f"vqe-exact={r['vqe'] - r['exact']:.3e} pair gap={r['pair_vqe'] - r['pair_exact']:.3e} "
              f"{'PASS' if ok else 'FAIL'}")
    return 1 if bad else 0


def cmd_sensitivity(args) -> int:
    cfg = _config(args)
    m_values = [int(x) for x in args.m_values.split(",")]
    omegas = [float(x) for x in args.omegas.split(",")]
    points = [(args.isotope, s, args.delta, w) for s in args.species.split(",") for w in omegas]
    rows = sensitivity(cfg, m_values, points)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sensitivity(rows, out / "sensitivity.csv")
    for r in rows:
        print(f"{r['isotope']} {r['species']} delta={r['delta']:+.3f} omega={r['omega_MeV']:.4f} m={r['m']}: "
              f"Jx={r['jx_hbar']} coherence={r['delta_coh_MeV']} [{r['status']}]")
    return 1 if any(str(r["status"]).startswith("error") for r in rows) else 0


def cmd_report(args) -> int:
    cfg = _config(args)
    print(report(cfg.out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (defaults to the production setup)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="RNG seed (multistart perturbations)")
    common.add_argument("--threads", type=int, help="worker processes for the scan")
    common.add_argument("--method", choices=sorted(_METHODS), help="which solvers to run")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cranked-vqe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("scan", parents=[common], help="full (delta, omega) scan").set_defaults(func=cmd_scan)

    p = sub.add_parser("point", parents=[common], help="single (delta, omega) solve")
    p.add_argument("--isotope", default="84Zr")
    p.add_argument("--species", default="neutron", choices=["proton", "neutron"])
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--omega", type=float, default=0.0)
    p.add_argument("--m", type=int)
    p.add_argument("--multistart", type=int, help="number of randomized extra starts")
    p.add_argument("--exact", action="store_true", help="also diagonalize the sector exactly")
    p.set_defaults(func=cmd_point)

    p = sub.add_parser("calibrate-g", parents=[common], help="fit G to the reference gap")
    p.add_argument("--isotope")
    p.set_defaults(func=cmd_calibrate)

    sub.add_parser("oracle-check", parents=[common], help="VQE vs exact diagonalization on small windows") \
        .set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("sensitivity", parents=[common], help="compare window sizes at fixed points")
    p.add_argument("--isotope", default="80Zr")
    p.add_argument("--species", default="proton,neutron")
    p.add_argument("--delta", type=float, default=-0.25)
    p.add_argument("--omegas", default="0.0,1.0")
    p.add_argument("--m-values", default="6,8")
    p.set_defaults(func=cmd_sensitivity)

    sub.add_parser("report", parents=[common], help="re-render the summary from scan CSVs") \
        .set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
