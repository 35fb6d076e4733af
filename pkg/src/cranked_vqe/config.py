"""Scan configuration: a flat TOML document with dotted keys, parsed strictly."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .active_space import SPECIES
from .hamiltonian import G_DEFAULT, LAMBDA_P_DEFAULT
from .vqe import OptimizerSettings

_SYMBOLS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu Zn "
    "Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba La Ce "
    "Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi Po At Rn"
).split()
ELEMENTS = {sym: z for z, sym in enumerate(_SYMBOLS, start=1)}

METHODS = ("vqe", "bcs", "exact")


@dataclass(frozen=True)
class Isotope:
    z: int
    a: int
    symbol: str

    @property
    def n(self) -> int:
        return self.a - self.z

    @property
    def name(self) -> str:
        return f"{self.a}{self.symbol}"

    def count(self, species: str) -> int:
        if species == "proton":
            return self.z
        if species == "neutron":
            return self.n
        raise ValueError(f"unknown species {species!r}")

    @classmethod
    def parse(cls, text: str) -> "Isotope":
        match = re.fullmatch(r"\s*(\d+)\s*([A-Z][a-z]?)\s*", text)
        if not match or match.group(2) not in ELEMENTS:
            raise ValueError(f"cannot parse isotope {text!r} (expected e.g. '84Zr')")
        a, sym = int(match.group(1)), match.group(2)
        z = ELEMENTS[sym]
        if a <= z:
            raise ValueError(f"{text}: mass number must exceed Z={z}")
        return cls(z, a, sym)


@dataclass(frozen=True)
class Mesh:
    count: int
    lo: float
    hi: float

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("mesh needs at least one point")
        if self.count > 1 and not self.hi > self.lo:
            raise ValueError("mesh max must exceed min")

    def points(self) -> list[float]:
        if self.count == 1:
            return [float(self.lo)]
        # rounding keeps mesh values exact in the CSVs (e.g. -0.25, not -0.25000000000000006)
        return [float(round(x, 12)) for x in np.linspace(self.lo, self.hi, self.count)]


@dataclass(frozen=True)
class ScanConfig:
    isotopes: tuple[Isotope, ...] = tuple(Isotope.parse(s) for s in ("80Zr", "82Zr", "84Zr"))
    species: tuple[str, ...] = SPECIES
    m: int = 8
    delta: Mesh = Mesh(25, -0.5, 0.5)
    omega: Mesh = Mesh(10, 0.0, 1.0)
    g: float | None = G_DEFAULT
    reference_gap: float = 1.878
    lambda_p: float = LAMBDA_P_DEFAULT
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    seed: int = 0
    methods: tuple[str, ...] = ("vqe", "bcs")
    threads: int = 1
    out: str = "scan_out"

    def __post_init__(self):
        if self.optimizer.seed != self.seed:
            object.__setattr__(self, "optimizer", replace(self.optimizer, seed=self.seed))
        if self.m < 2:
            raise ValueError("m must be at least 2")
        for s in self.species:
            if s not in SPECIES:
                raise ValueError(f"unknown species {s!r}")
        for meth in self.methods:
            if meth not in METHODS:
                raise ValueError(f"unknown method {meth!r}; choose from {METHODS}")
        if self.g is not None and self.g < 0:
            raise ValueError("g must be non-negative")
        if self.omega.lo < 0:
            raise ValueError("omega mesh must start at >= 0")

    @property
    def calibrate(self) -> bool:
        return self.g is None


def _float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError(f"expected a number, got {v!r}")
    return float(v)


def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError(f"expected an integer, got {v!r}")
    return v


def _str_list(v):
    if isinstance(v, str):
        return (v,)
    if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
        raise TypeError(f"expected a list of strings, got {v!r}")
    return tuple(v)


# the RNG seed lives at top level only
_OPT_KEYS = {f.name for f in fields(OptimizerSettings)} - {"seed"}


def _flatten(doc: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for key, value in doc.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def config_from_mapping(doc: dict) -> ScanConfig:
    flat = _flatten(doc)
    cfg = ScanConfig()
    mesh = {"delta": {}, "omega": {}}
    opt = {}
    updates: dict[str, Any] = {}
    for key, value in flat.items():
        try:
            if key == "isotopes":
                updates["isotopes"] = tuple(Isotope.parse(s) for s in _str_list(value))
            elif key == "species":
                updates["species"] = _str_list(value)
            elif key == "m":
                updates["m"] = _int(value)
            elif key in ("delta.count", "omega.count"):
                mesh[key.split(".")[0]]["count"] = _int(value)
            elif key in ("delta.min", "delta.max", "omega.min", "omega.max"):
                sec, end = key.split(".")
                mesh[sec]["lo" if end == "min" else "hi"] = _float(value)
            elif key == "pairing.g":
                if value == "calibrate":
                    updates["g"] = None
                else:
                    updates["g"] = _float(value)
            elif key == "pairing.reference_gap":
                updates["reference_gap"] = _float(value)
            elif key == "pairing.lambda_p":
                updates["lambda_p"] = _float(value)
            elif key.startswith("optimizer.") and key[10:] in _OPT_KEYS:
                name = key[10:]
                opt[name] = _int(value) if name in ("max_iter", "multistart") else _float(value)
            elif key == "seed":
                updates["seed"] = _int(value)
            elif key == "methods":
                updates["methods"] = _str_list(value)
            elif key == "threads":
                updates["threads"] = _int(value)
            elif key == "output.dir":
                if not isinstance(value, str):
                    raise TypeError("output.dir must be a string")
                updates["out"] = value
            else:
                raise KeyError(key)
        except KeyError:
            raise ValueError(f"unknown config key {key!r}") from None
        except TypeError as exc:
            raise ValueError(f"config key {key!r}: {exc}") from None
    for sec in ("delta", "omega"):
        if mesh[sec]:
            base = getattr(cfg, sec)
            updates[sec] = Mesh(
                mesh[sec].get("count", base.count), mesh[sec].get("lo", base.lo), mesh[sec].get("hi", base.hi)
            )
    out = replace(cfg, **updates)
    return replace(out, optimizer=replace(out.optimizer, seed=out.seed, **opt))


def load_config(path: str | Path) -> ScanConfig:
    with open(path, "rb") as fh:
        return config_from_mapping(tomllib.load(fh))


def config_to_toml(cfg: ScanConfig) -> str:
    """Inverse of ``load_config`` (used to record the effective config next to outputs)."""
    opt = cfg.optimizer
    lines = [
        f"isotopes = [{', '.join(repr(i.name) for i in cfg.isotopes)}]".replace("'", '"'),
        f"species = [{', '.join(repr(s) for s in cfg.species)}]".replace("'", '"'),
        f"m = {cfg.m}",
        f"delta.count = {cfg.delta.count}",
        f"delta.min = {cfg.delta.lo!r}",
        f"delta.max = {cfg.delta.hi!r}",
        f"omega.count = {cfg.omega.count}",
        f"omega.min = {cfg.omega.lo!r}",
        f"omega.max = {cfg.omega.hi!r}",
        'pairing.g = "calibrate"' if cfg.g is None else f"pairing.g = {cfg.g!r}",
        f"pairing.reference_gap = {cfg.reference_gap!r}",
        f"pairing.lambda_p = {cfg.lambda_p!r}",
    ]
    for f in fields(OptimizerSettings):
        if f.name != "seed":
            lines.append(f"optimizer.{f.name} = {getattr(opt, f.name)!r}")
    lines += [
        f"seed = {cfg.seed}",
        f"methods = [{', '.join(repr(s) for s in cfg.methods)}]".replace("'", '"'),
        f"threads = {cfg.threads}",
        f'output.dir = "{cfg.out}"',
    ]
    return "\n".join(lines) + "\n"
