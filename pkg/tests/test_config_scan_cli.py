from __future__ import annotations

import json
import math
from math import comb
from pathlib import Path

import pytest

from cranked_vqe.cli import main
from cranked_vqe.config import Isotope, Mesh, ScanConfig, config_from_mapping, config_to_toml, load_config
from cranked_vqe.scan import (
    COLUMNS,
    TIE_TOL,
    read_csv,
    scaling_table,
    select_minimum,
    write_csv,
)

ROOT = Path(__file__).resolve().parents[1]


def test_isotope_parse():
    iso = Isotope.parse("82Zr")
    assert (iso.z, iso.a, iso.n, iso.name) == (40, 82, 42, "82Zr")
    assert iso.count("proton") == 40 and iso.count("neutron") == 42
    for bad in ("Zr82", "82Xx", "30Zr"):
        with pytest.raises(ValueError):
            Isotope.parse(bad)


def test_mesh_points():
    assert Mesh(25, -0.5, 0.5).points()[6] == -0.25
    assert Mesh(1, 0.3, 0.3).points() == [0.3]
    assert Mesh(10, 0.0, 1.0).points()[-1] == 1.0
    with pytest.raises(ValueError):
        Mesh(0, 0, 1)
    with pytest.raises(ValueError):
        Mesh(3, 1, 0)


def test_config_strictness():
    with pytest.raises(ValueError, match="unknown config key"):
        config_from_mapping({"detla": {"count": 3}})
    with pytest.raises(ValueError, match="unknown config key"):
        config_from_mapping({"optimizer": {"seed": 3}})
    with pytest.raises(ValueError):
        config_from_mapping({"m": 8.5})
    with pytest.raises(ValueError):
        config_from_mapping({"methods": ["vqe", "dmrg"]})
    with pytest.raises(ValueError):
        config_from_mapping({"species": ["electron"]})
    cfg = config_from_mapping({"pairing": {"g": "calibrate"}, "seed": 4, "optimizer": {"max_iter": 50}})
    assert cfg.calibrate and cfg.seed == 4 and cfg.optimizer.seed == 4 and cfg.optimizer.max_iter == 50


@pytest.mark.parametrize("name", ["production.toml", "minimal.toml"])
def test_config_round_trip(tmp_path, name):
    cfg = load_config(ROOT / "configs" / name)
    path = tmp_path / "c.toml"
    path.write_text(config_to_toml(cfg))
    assert load_config(path) == cfg


def test_production_defaults():
    cfg = load_config(ROOT / "configs" / "production.toml")
    assert [i.name for i in cfg.isotopes] == ["80Zr", "82Zr", "84Zr"]
    assert cfg.m == 8 and cfg.delta == Mesh(25, -0.5, 0.5) and cfg.omega == Mesh(10, 0.0, 1.0)
    assert cfg == ScanConfig(out=cfg.out)


def test_select_minimum_ties():
    assert select_minimum([(-0.1, -5.0), (0.2, -5.0 + TIE_TOL / 2), (0.3, -4.0)]) == -0.1
    assert select_minimum([(0.1, -5.0), (-0.1, -5.0)]) == -0.1
    assert select_minimum([(0.3, -5.0), (0.1, -5.0 + 1e-6)]) == 0.3
    assert select_minimum([(0.1, float("nan")), (0.2, "")]) is None


def test_scaling_table():
    rows = {r["M"]: r for r in scaling_table(range(2, 17))}
    assert rows[8]["fixed_n_dim"] == 12870 and rows[8]["qubits"] == 16
    assert rows[8]["seniority_zero_dim"] == comb(8, 4)
    assert all(r["fixed_n_dim"] == comb(2 * m, m) for m, r in rows.items())


def test_csv_round_trip(tmp_path):
    row = {c: "" for c in COLUMNS}
    row.update(isotope="84Zr", species="proton", method="vqe", delta=-0.25, omega_MeV=0.1,
               routhian_MeV=-1.0000000000000002, n_fev=12, is_minimum=True, status="ok")
    write_csv([row], tmp_path / "a.csv")
    back = read_csv(tmp_path / "a.csv")[0]
    assert back["routhian_MeV"] == -1.0000000000000002 and back["n_fev"] == 12
    assert back["is_minimum"] is True and back["jx_hbar"] == ""
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == ",".join(COLUMNS)


def test_cli_point_matches_exact(capsys):
    rc = main(["point", "--isotope", "84Zr", "--species", "neutron", "--delta", "0.25", "--omega", "0.5",
               "--m", "3", "--exact", "--method", "both"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["n_doubles"] == 3
    assert out["vqe"]["routhian_MeV"] == pytest.approx(out["exact_routhian_MeV"], abs=1e-8)
    assert out["vqe"]["routhian_MeV"] >= out["exact_routhian_MeV"] - 1e-10
    assert abs(out["vqe"]["n_mean"] - 4) < 1e-10
    assert out["bcs"]["converged"]


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("unknown = 1\n")
    assert main(["scan", "--config", str(bad)]) == 2
    assert "unknown config key" in capsys.readouterr().err
    assert main(["scan", "--config", str(tmp_path / "missing.toml")]) == 2
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_cli_minimal_scan_and_report(tmp_path, capsys):
    out = tmp_path / "run"
    rc = main(["scan", "--config", str(ROOT / "configs" / "minimal.toml"), "--out", str(out)])
    assert rc == 0
    for name in ("surfaces.csv", "path.csv", "pairing.csv", "scaling.csv", "windows.csv", "summary.md",
                 "diagnostics.json", "config.toml"):
        assert (out / name).exists()
    rows = read_csv(out / "surfaces.csv")
    exact = {(r["species"], r["delta"], r["omega_MeV"]): r["routhian_MeV"]
             for r in rows if r["method"] == "exact" and r["species"] != "total"}
    for r in rows:
        if r["method"] == "vqe" and r["species"] != "total":
            ref = exact[(r["species"], r["delta"], r["omega_MeV"])]
            assert r["routhian_MeV"] >= ref - 1e-9
            # at omega > 0 an m = 2 window may need a broken pair the ansatz cannot reach
            if r["omega_MeV"] == 0.0:
                assert r["routhian_MeV"] == pytest.approx(ref, abs=1e-6)
    # exactly one minimum per (method, isotope, species, omega)
    mins = {}
    for r in rows:
        key = (r["method"], r["species"], r["omega_MeV"])
        mins[key] = mins.get(key, 0) + bool(r["is_minimum"])
    assert set(mins.values()) == {1}
    capsys.readouterr()
    assert main(["report", "--out", str(out)]) == 0
    assert "84Zr" in capsys.readouterr().out


@pytest.fixture(scope="module")
def minimal_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("scan")
    cfg = ROOT / "configs" / "minimal.toml"
    both, proton = base / "both", base / "proton"
    assert main(["scan", "--config", str(cfg), "--out", str(both)]) == 0
    single = base / "proton.toml"
    single.write_text(cfg.read_text() + 'species = ["proton"]\n')
    assert main(["scan", "--config", str(single), "--out", str(proton)]) == 0
    return read_csv(both / "surfaces.csv"), read_csv(proton / "surfaces.csv"), read_csv(both / "path.csv")


@pytest.mark.xfail(strict=True, reason="structured ansatz cannot break a pair when j_x only couples "
                                       "Kramers partners (m=2, opposite-parity window); see ledger")
def test_minimal_scan_vqe_equals_oracle_everywhere(minimal_runs):
    rows = minimal_runs[0]
    exact = {(r["species"], r["delta"], r["omega_MeV"]): r["routhian_MeV"]
             for r in rows if r["method"] == "exact" and r["species"] != "total"}
    for r in rows:
        if r["method"] == "vqe" and r["species"] != "total":
            assert r["routhian_MeV"] == pytest.approx(exact[(r["species"], r["delta"], r["omega_MeV"])], abs=1e-6)


def test_species_rows_reproducible_in_isolation(minimal_runs):
    both, proton, _ = minimal_runs
    cols = ("routhian_MeV", "jx_hbar", "delta_coh_MeV", "n_mean", "n_var", "n_fev", "n_it", "last_step_MeV", "branch")
    key = lambda r: (r["method"], r["delta"], r["omega_MeV"])
    a = {key(r): [r[c] for c in cols] for r in both if r["species"] == "proton"}
    b = {key(r): [r[c] for c in cols] for r in proton if r["species"] == "proton"}
    assert a == b and a


def test_minimum_rederivable_and_endpoints_one_sided(minimal_runs):
    surfaces, _, path = minimal_runs
    for meth in ("vqe", "bcs", "exact"):
        for w in (0.0, 1.0):
            tot = [r for r in surfaces if r["method"] == meth and r["species"] == "total" and r["omega_MeV"] == w]
            best = select_minimum((r["delta"], r["routhian_MeV"]) for r in tot)
            flagged = [r["delta"] for r in tot if r["is_minimum"]]
            assert flagged == [best]
    for meth in ("vqe", "bcs"):
        for s in ("proton", "neutron", "total"):
            pts = sorted((r for r in path if r["method"] == meth and r["species"] == s), key=lambda r: r["omega_MeV"])
            assert pts[0]["one_sided"] is True and pts[-1]["one_sided"] is True
            assert all(p["one_sided"] is False for p in pts[1:-1])


def test_sensitivity_identical_m_gives_identical_rows():
    from cranked_vqe.scan import sensitivity

    cfg = ScanConfig(omega=Mesh(2, 0.0, 0.5))
    rows = sensitivity(cfg, [3, 3], [("84Zr", "neutron", 0.2, 0.5)])
    assert len(rows) == 2 and rows[0] == rows[1]
    assert rows[0]["status"] == "ok" and math.isfinite(rows[0]["delta_coh_MeV"])


def test_calibrated_g_grows_with_reference_gap():
    from cranked_vqe.bcs import calibrate_g
    from conftest import window

    actives = [window(6, 0.3, a=84, species=s)[0] for s in ("proton", "neutron")]
    g1, g2 = calibrate_g(1.2, actives), calibrate_g(1.9, actives)
    assert g1 < g2


def test_window_table(tmp_path):
    from cranked_vqe.scan import window_table, write_windows

    cfg = ScanConfig(isotopes=(Isotope.parse("84Zr"),), delta=Mesh(5, -0.4, 0.4))
    rows = window_table(cfg)
    assert len(rows) == 10
    assert all(r["n_act"] == 8 and len(r["labels"].split()) == 8 for r in rows)
    assert [r["labels_changed"] for r in rows[:5]][0] is False
    write_windows(cfg, tmp_path / "w.csv")
    assert (tmp_path / "w.csv").read_text().splitlines()[0].startswith("isotope,species,delta,m")
