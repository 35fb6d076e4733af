"""(delta, omega) scans over isotopes and species, and their CSV/JSON outputs."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .active_space import ActiveSpace, select_window
from .ansatz import AnsatzProgram, CompiledAnsatz, build_graph
from .bcs import calibrate_g, solve_bcs
from .config import Isotope, ScanConfig, config_to_toml
from .hamiltonian import RouthianSpec, jx_pauli, qubit_routhian
from .nilsson import NilssonParams, build_spherical_basis, diagonalize, jx_matrix
from .observables import dynamical_moi, measure
from .oracle import exact_ground
from .statevector import SectorSimulator
from .vqe import NonFiniteObjective, OptimizerSettings, minimize

log = logging.getLogger(__name__)

COLUMNS = (
    "isotope", "species", "method", "delta", "omega_MeV", "routhian_MeV", "routhian_shifted_MeV",
    "jx_hbar", "j2_hbar2_per_MeV", "one_sided", "delta_kappa_MeV", "delta_coh_MeV", "n_mean",
    "n_var", "n_fev", "n_it", "last_step_MeV", "branch", "is_minimum", "status",
)
TIE_TOL = 1e-9
EXACT_LIMIT = 200_000


# ---------------------------------------------------------------------------
# single sectors


@lru_cache(maxsize=64)
def _levels(a: int, delta: float):
    return diagonalize(NilssonParams.for_mass(a), delta)


@lru_cache(maxsize=1)
def _basis():
    return build_spherical_basis(7)


def sector_problem(a: int, count: int, species: str, delta: float, m: int) -> tuple[ActiveSpace, np.ndarray]:
    """Active window and its j_x matrix for one species at one deformation."""
    active = select_window(_levels(a, float(delta)), count, m, species)
    return active, jx_matrix(active.levels, _basis())


def _blank(isotope: str, species: str, method: str, delta: float, omega: float) -> dict:
    row = {c: "" for c in COLUMNS}
    row.update(isotope=isotope, species=species, method=method, delta=delta, omega_MeV=omega,
               is_minimum=False, one_sided="", status="ok")
    return row


@dataclass(frozen=True)
class SectorTask:
    a: int
    count: int
    species: str
    delta: float
    m: int
    g: float
    lambda_p: float
    omegas: tuple[float, ...]
    methods: tuple[str, ...]
    settings: OptimizerSettings

    @property
    def key(self):
        # proton and neutron sectors with equal particle number are the same problem
        return (self.a, self.count, self.delta, self.m, self.g, self.lambda_p, self.omegas,
                self.methods, self.settings)


def vqe_sequence(active: ActiveSpace, jx: np.ndarray, g: float, lambda_p: float,
                 omegas: Sequence[float], settings: OptimizerSettings):
    """Warm-started VQE along omegas; yields (omega, result | exception, observables | None)."""
    program = AnsatzProgram(build_graph(active, jx), active)
    sim = SectorSimulator(active.num_qubits, active.n_act)
    h0 = sim.compile(qubit_routhian(RouthianSpec(active, g, 0.0, lambda_p, jx)))
    jop = jx_pauli(jx)
    jsec = sim.compile(jop)
    compiled = CompiledAnsatz(program, sim=sim)
    x = None
    for w in omegas:
        h = (h0 - w * jsec).tocsr() if w else h0
        h.sort_indices()
        compiled.set_hamiltonian(h)
        try:
            res = minimize(compiled, None, x, settings)
        except (NonFiniteObjective, ArithmeticError, ValueError) as exc:
            yield w, exc, None
            continue
        x = res.parameters
        obs = measure(compiled.state(res.parameters), active, g, jop, res.energy)
        yield w, res, obs


def run_sector(task: SectorTask, isotope: str = "") -> list[dict]:
    """All rows (every method, every omega) for one species at one deformation."""
    rows = []
    try:
        active, jx = sector_problem(task.a, task.count, task.species, task.delta, task.m)
    except ValueError as exc:
        for meth in task.methods:
            for w in task.omegas:
                row = _blank(isotope, task.species, meth, task.delta, w)
                row["status"] = f"error: {exc}"
                rows.append(row)
        return rows

    if "vqe" in task.methods:
        for w, res, obs in vqe_sequence(active, jx, task.g, task.lambda_p, task.omegas, task.settings):
            row = _blank(isotope, task.species, "vqe", task.delta, w)
            if obs is None:
                row["status"] = f"error: {res}"
            else:
                row.update(
                    routhian_MeV=res.energy, jx_hbar=obs.jx, delta_kappa_MeV=obs.delta_kappa,
                    delta_coh_MeV=obs.delta_coh, n_mean=obs.n_mean, n_var=obs.n_var,
                    n_fev=res.n_fev, n_it=res.n_it, last_step_MeV=res.last_step,
                    status="ok" if res.converged else "unconverged",
                )
            rows.append(row)

    if "bcs" in task.methods:
        for w in task.omegas:
            row = _blank(isotope, task.species, "bcs", task.delta, w)
            try:
                sol = solve_bcs(active, task.g, w, jx)
            except (ArithmeticError, ValueError, RuntimeError) as exc:
                row["status"] = f"error: {exc}"
            else:
                rho = sol.rho
                row.update(
                    routhian_MeV=sol.routhian, jx_hbar=sol.jx, delta_kappa_MeV=sol.gap,
                    n_mean=sol.particle_number, n_var=max(2.0 * float(np.trace(rho - rho @ rho)), 0.0),
                    n_it=sol.iterations, branch=sol.branch,
                    status="ok" if sol.converged else "unconverged",
                )
            rows.append(row)

    if "exact" in task.methods:
        for w in task.omegas:
            row = _blank(isotope, task.species, "exact", task.delta, w)
            if comb(active.num_qubits, active.n_act) > EXACT_LIMIT:
                row["status"] = "skipped: sector too large"
            else:
                e, _ = exact_ground(RouthianSpec(active, task.g, w, task.lambda_p, jx))
                row["routhian_MeV"] = e
            rows.append(row)
    return rows


def _run_task(args):
    task, isotope = args
    return run_sector(task, isotope)


# ---------------------------------------------------------------------------
# full scan


@dataclass
class ScanResult:
    config: ScanConfig
    g_by_isotope: dict[str, float]
    surfaces: list[dict]
    path: list[dict]
    pairing: list[dict]
    failures: int


def resolve_g(cfg: ScanConfig) -> dict[str, float]:
    if not cfg.calibrate:
        return {iso.name: cfg.g for iso in cfg.isotopes}
    out = {}
    for iso in cfg.isotopes:
        actives = [sector_problem(iso.a, iso.count(s), s, 0.0, cfg.m)[0] for s in cfg.species]
        out[iso.name] = calibrate_g(cfg.reference_gap, actives)
    return out


def _tasks(cfg: ScanConfig, g_by_isotope: dict[str, float]):
    omegas = tuple(cfg.omega.points())
    for iso in cfg.isotopes:
        for species in cfg.species:
            for delta in cfg.delta.points():
                yield iso.name, SectorTask(iso.a, iso.count(species), species, delta, cfg.m,
                                           g_by_isotope[iso.name], cfg.lambda_p, omegas,
                                           cfg.methods, cfg.optimizer)


def run_sectors(cfg: ScanConfig, g_by_isotope: dict[str, float], threads: int = 1) -> list[dict]:
    """Rows for every (isotope, species, delta, method, omega) in mesh order."""
    labelled = list(_tasks(cfg, g_by_isotope))
    unique: dict = {}
    for name, task in labelled:
        unique.setdefault(task.key, (task, name))
    jobs = list(unique.values())
    log.info("%d sector problems (%d after merging identical ones)", len(labelled), len(jobs))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(_run_task, jobs, chunksize=1))
    else:
        done = []
        for i, job in enumerate(jobs):
            done.append(_run_task(job))
            log.info("sector %d/%d done (%s %s delta=%+.4f)", i + 1, len(jobs), job[1], job[0].species, job[0].delta)
    by_key = {job[0].key: rows for job, rows in zip(jobs, done)}
    rows = []
    for name, task in labelled:
        for r in by_key[task.key]:
            rows.append(dict(r, isotope=name, species=task.species))
    return rows


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def select_minimum(entries: Iterable[tuple[float, float]]) -> float | None:
    """delta with the lowest energy; near-ties go to smaller |delta|, then negative delta."""
    entries = [(d, e) for d, e in entries if _finite(e)]
    if not entries:
        return None
    emin = min(e for _, e in entries)
    close = [d for d, e in entries if e - emin <= TIE_TOL]
    return min(close, key=lambda d: (abs(d), d))


def aggregate(cfg: ScanConfig, rows: list[dict]) -> tuple[list[dict], list[dict], list[dict]]:
    """Add total-Routhian rows, shifts, delta*(omega), J(2) paths and the pairing table."""
    species = list(cfg.species)
    grid = {(r["method"], r["isotope"], r["species"], r["delta"], r["omega_MeV"]): r for r in rows}
    deltas = cfg.delta.points()
    omegas = cfg.omega.points()
    methods = [m for m in cfg.methods]
    isotopes = [i.name for i in cfg.isotopes]

    surfaces = []
    for meth in methods:
        for iso in isotopes:
            for d in deltas:
                for w in omegas:
                    parts = [grid.get((meth, iso, s, d, w)) for s in species]
                    if any(p is None for p in parts):
                        continue
                    tot = _blank(iso, "total", meth, d, w)
                    bad = [p["status"] for p in parts if p["status"] not in ("ok", "unconverged")]
                    if bad:
                        tot["status"] = bad[0]
                    else:
                        tot["status"] = "ok" if all(p["status"] == "ok" for p in parts) else "unconverged"
                        for col in ("routhian_MeV", "jx_hbar", "n_mean", "n_var"):
                            vals = [p[col] for p in parts]
                            if all(_finite(v) for v in vals):
                                tot[col] = float(sum(vals))
                        for col in ("n_fev", "n_it"):
                            vals = [p[col] for p in parts]
                            if all(isinstance(v, int) for v in vals):
                                tot[col] = sum(vals)
                    grid[(meth, iso, "total", d, w)] = tot

    all_species = species + (["total"] if len(species) > 1 else [])
    dstar = {}
    for meth in methods:
        for iso in isotopes:
            ref_species = "total" if len(species) > 1 else species[0]
            for w in omegas:
                best = select_minimum(
                    (d, grid[(meth, iso, ref_species, d, w)]["routhian_MeV"])
                    for d in deltas if (meth, iso, ref_species, d, w) in grid
                )
                dstar[(meth, iso, w)] = best
            for s in all_species:
                for w in omegas:
                    cells = [grid[(meth, iso, s, d, w)] for d in deltas if (meth, iso, s, d, w) in grid]
                    energies = [c["routhian_MeV"] for c in cells if _finite(c["routhian_MeV"])]
                    emin = min(energies) if energies else None
                    for c in cells:
                        if emin is not None and _finite(c["routhian_MeV"]):
                            c["routhian_shifted_MeV"] = c["routhian_MeV"] - emin
                        c["is_minimum"] = c["delta"] == dstar[(meth, iso, w)]
                        surfaces.append(c)

    path = []
    for meth in methods:
        for iso in isotopes:
            for s in all_species:
                pts = []
                for w in omegas:
                    d = dstar[(meth, iso, w)]
                    if d is None or (meth, iso, s, d, w) not in grid:
                        continue
                    pts.append(dict(grid[(meth, iso, s, d, w)]))
                if not pts:
                    continue
                e0 = pts[0]["routhian_MeV"]
                for p in pts:
                    p["routhian_shifted_MeV"] = p["routhian_MeV"] - e0 if _finite(e0) and _finite(p["routhian_MeV"]) else ""
                jx_pts = [(p["omega_MeV"], p["jx_hbar"]) for p in pts]
                if len(pts) >= 2 and all(_finite(j) for _, j in jx_pts):
                    for p, (_, j2, one_sided) in zip(pts, dynamical_moi(jx_pts)):
                        p["j2_hbar2_per_MeV"] = j2
                        p["one_sided"] = one_sided
                path.extend(pts)

    pairing = [p for p in path if p["species"] != "total" and p["method"] in ("vqe", "bcs")]
    return surfaces, path, pairing


def run_scan(cfg: ScanConfig, threads: int | None = None) -> ScanResult:
    threads = cfg.threads if threads is None else threads
    g_by_isotope = resolve_g(cfg)
    rows = run_sectors(cfg, g_by_isotope, threads)
    surfaces, path, pairing = aggregate(cfg, rows)
    failures = sum(1 for r in rows if str(r["status"]).startswith("error"))
    return ScanResult(cfg, g_by_isotope, surfaces, path, pairing, failures)


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ""
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(rows: Sequence[dict], path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in COLUMNS])
    Path(path).write_text(buf.getvalue())


def _parse(col: str, text: str):
    if text == "":
        return ""
    if col in ("is_minimum", "one_sided"):
        return text == "true"
    if col in ("n_fev", "n_it"):
        return int(text)
    if col in ("isotope", "species", "method", "branch", "status"):
        return text
    return float(text)


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [{c: _parse(c, r[c]) for c in COLUMNS} for r in reader]


def scaling_table(m_values: Iterable[int] = range(2, 17)) -> list[dict]:
    """Fixed-N (half filling) and seniority-zero dimensions against register size."""
    return [
        {"M": m, "qubits": 2 * m, "fixed_n_dim": comb(2 * m, m), "seniority_zero_dim": comb(m, m // 2)}
        for m in m_values
    ]


def write_scaling(path: str | Path, m_values: Iterable[int] = range(2, 17)) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["M", "qubits", "fixed_n_dim", "seniority_zero_dim"])
    for r in scaling_table(m_values):
        writer.writerow([r["M"], r["qubits"], r["fixed_n_dim"], r["seniority_zero_dim"]])
    Path(path).write_text(buf.getvalue())


WINDOW_COLUMNS = ("isotope", "species", "delta", "m", "first_index", "n_act", "lambda_f_MeV",
                  "labels", "n_singles", "labels_changed")


def window_table(cfg: ScanConfig) -> list[dict]:
    """Active window per (isotope, species, delta); labels_changed flags a re-selection jump."""
    rows = []
    for iso in cfg.isotopes:
        for species in cfg.species:
            prev = None
            for d in cfg.delta.points():
                active, jx = sector_problem(iso.a, iso.count(species), species, d, cfg.m)
                labels = " ".join(active.labels)
                rows.append({
                    "isotope": iso.name, "species": species, "delta": d, "m": active.m,
                    "first_index": active.first_index, "n_act": active.n_act,
                    "lambda_f_MeV": active.lambda_f, "labels": labels,
                    "n_singles": len(build_graph(active, jx).singles),
                    "labels_changed": prev is not None and labels != prev,
                })
                prev = labels
    return rows


def write_windows(cfg: ScanConfig, path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(WINDOW_COLUMNS)
    for r in window_table(cfg):
        writer.writerow([_fmt(r[c]) for c in WINDOW_COLUMNS])
    Path(path).write_text(buf.getvalue())


def _pick(rows, **kw):
    return [r for r in rows if all(r[k] == v for k, v in kw.items())]


def summary_table(path_rows: list[dict], isotopes: Sequence[str], omegas: Sequence[float]) -> str:
    """Markdown table of path observables at the first and last frequency."""
    w_ends = [omegas[0], omegas[-1]] if len(omegas) > 1 else [omegas[0]]
    lines = [
        "| isotope | omega (MeV) | method | delta* | Jx p | Jx n | Jx total | gap p | gap n |",
        "|---|---|---|---|---|---|---|---|---|",
    ]

    def val(rows, col):
        return f"{rows[0][col]:.4f}" if rows and _finite(rows[0][col]) else "-"

    for iso in isotopes:
        for w in w_ends:
            for meth in ("vqe", "bcs"):
                sel = _pick(path_rows, isotope=iso, omega_MeV=w, method=meth)
                if not sel:
                    continue
                gap_col = "delta_coh_MeV" if meth == "vqe" else "delta_kappa_MeV"
                p, n, t = (_pick(sel, species=s) for s in ("proton", "neutron", "total"))
                lines.append(
                    f"| {iso} | {w:.4f} | {meth} | {sel[0]['delta']:+.4f} | {val(p, 'jx_hbar')} | "
                    f"{val(n, 'jx_hbar')} | {val(t, 'jx_hbar')} | {val(p, gap_col)} | {val(n, gap_col)} |"
                )
    lines.append("")
    lines.append("gap = fixed-N coherence proxy for vqe rows, mean-field pairing gap for bcs rows.")
    return "\n".join(lines) + "\n"


def diagnostics(result: ScanResult) -> dict:
    cfg = result.config
    omegas = cfg.omega.points()
    ends = sorted({omegas[0], omegas[-1]})
    out = {"g_MeV": result.g_by_isotope, "failures": result.failures, "endpoints": []}
    vqe_rows = [r for r in result.surfaces if r["method"] == "vqe" and r["species"] != "total"]
    steps = [r["last_step_MeV"] for r in vqe_rows if _finite(r["last_step_MeV"])]
    fevs = [r["n_fev"] for r in vqe_rows if isinstance(r["n_fev"], int)]
    if steps:
        out["max_last_step_MeV"] = max(steps)
        out["n_fev_median"] = float(np.median(fevs))
        out["n_fev_max"] = max(fevs)
        out["unconverged_points"] = sum(1 for r in vqe_rows if r["status"] == "unconverged")
    for r in result.path:
        if r["method"] == "vqe" and r["species"] != "total" and r["omega_MeV"] in ends:
            out["endpoints"].append({
                "isotope": r["isotope"], "species": r["species"], "delta": r["delta"],
                "omega_MeV": r["omega_MeV"], "routhian_MeV": r["routhian_MeV"],
                "n_fev": r["n_fev"], "n_it": r["n_it"], "last_step_MeV": r["last_step_MeV"],
                "status": r["status"],
            })
    return out


def write_outputs(result: ScanResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    write_csv(result.surfaces, out / "surfaces.csv")
    write_csv(result.path, out / "path.csv")
    write_csv(result.pairing, out / "pairing.csv")
    write_scaling(out / "scaling.csv", sorted(set(range(2, 17)) | {cfg.m}))
    write_windows(cfg, out / "windows.csv")
    (out / "summary.md").write_text(
        summary_table(result.path, [i.name for i in cfg.isotopes], cfg.omega.points())
    )
    (out / "diagnostics.json").write_text(json.dumps(diagnostics(result), indent=2, sort_keys=True) + "\n")
    (out / "config.toml").write_text(config_to_toml(cfg))


def report(out_dir: str | Path, isotopes: Sequence[str] | None = None) -> str:
    """Re-render the summary table from an existing path.csv."""
    rows = read_csv(Path(out_dir) / "path.csv")
    isotopes = isotopes or list(dict.fromkeys(r["isotope"] for r in rows))
    omegas = sorted({r["omega_MeV"] for r in rows})
    return summary_table(rows, isotopes, omegas)


# ---------------------------------------------------------------------------
# sensitivity to the window size


def sensitivity(cfg: ScanConfig, m_values: Sequence[int], points: Sequence[tuple[str, str, float, float]]) -> list[dict]:
    """J_x and the coherence proxy at fixed (isotope, species, delta, omega) for several m.

    Each point is reached by warm starts along the config's omega mesh up to
    the requested frequency (which is appended if it is not on the mesh).
    """
    g_by_isotope = resolve_g(cfg)
    out = []
    for iso_name, species, delta, omega in points:
        iso = Isotope.parse(iso_name)
        omegas = sorted({w for w in cfg.omega.points() if w <= omega} | {float(omega)})
        for m in m_values:
            row = {"isotope": iso.name, "species": species, "delta": float(delta), "omega_MeV": float(omega),
                   "m": m, "jx_hbar": "", "delta_coh_MeV": "", "routhian_MeV": "", "status": "ok"}
            try:
                active, jx = sector_problem(iso.a, iso.count(species), species, float(delta), m)
                last = None
                for w, res, obs in vqe_sequence(active, jx, g_by_isotope[iso.name], cfg.lambda_p,
                                                omegas, cfg.optimizer):
                    last = (res, obs)
                res, obs = last
                if obs is None:
                    raise res
                row.update(jx_hbar=obs.jx, delta_coh_MeV=obs.delta_coh, routhian_MeV=res.energy,
                           status="ok" if res.converged else "unconverged")
            except Exception as exc:  # reported per point, the comparison continues
                row["status"] = f"error: {exc}"
            out.append(row)
    return out


SENSITIVITY_COLUMNS = ("isotope", "species", "delta", "omega_MeV", "m", "routhian_MeV", "jx_hbar",
                       "delta_coh_MeV", "status")


def write_sensitivity(rows: Sequence[dict], path: str | Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SENSITIVITY_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in SENSITIVITY_COLUMNS])
    Path(path).write_text(buf.getvalue())
