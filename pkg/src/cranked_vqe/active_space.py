"""Active window of Kramers-degenerate Nilsson levels around the Fermi surface."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .nilsson import NilssonLevel

SPECIES = ("proton", "neutron")


@dataclass(frozen=True)
class ActiveSpace:
    """m levels; level k owns spin orbitals (2k, 2k+1) = (k+, k-)."""

    levels: tuple[NilssonLevel, ...]
    n_act: int
    lambda_f: float = 0.0
    species: str = "proton"
    first_index: int = 0

    def __post_init__(self):
        if self.n_act % 2 or not 0 < self.n_act <= 2 * self.m:
            raise ValueError(f"n_act={self.n_act} invalid for m={self.m}")
        if self.species not in SPECIES:
            raise ValueError(f"unknown species {self.species!r}")

    @property
    def m(self) -> int:
        return len(self.levels)

    @property
    def num_qubits(self) -> int:
        return 2 * self.m

    @property
    def n_pairs(self) -> int:
        return self.n_act // 2

    @property
    def energies(self) -> np.ndarray:
        return np.array([lv.energy for lv in self.levels])

    @property
    def labels(self) -> list[str]:
        return [str(lv.label) for lv in self.levels]


def recenter_lambda(active: ActiveSpace) -> float:
    """Midpoint between the highest occupied and lowest empty window level."""
    e = active.energies
    occ = active.n_pairs
    if occ >= active.m:
        return float(e.max())
    return 0.5 * float(e[occ - 1] + e[occ])


def select_window(
    levels: Sequence[NilssonLevel], particle_count: int, m: int, species: str = "proton"
) -> ActiveSpace:
    """Take ceil(m/2) filled and floor(m/2) empty levels at the reference filling.

    ``levels`` must be energy-ordered (as returned by ``nilsson.diagonalize``);
    the reference filling occupies the lowest particle_count/2 levels.
    """
    if particle_count % 2 or particle_count <= 0:
        raise ValueError(f"particle_count must be positive and even, got {particle_count}")
    if m < 2:
        raise ValueError("window needs at least two levels")
    if len(levels) < m:
        raise ValueError(f"spectrum has {len(levels)} levels, window needs {m}")
    fermi = particle_count // 2 - 1
    n_occ = (m + 1) // 2
    start = fermi - n_occ + 1
    stop = start + m
    if start < 0 or stop > len(levels):
        raise ValueError(
            f"window [{start}, {stop}) extends past the spectrum of {len(levels)} levels"
        )
    active = ActiveSpace(tuple(levels[start:stop]), 2 * n_occ, 0.0, species, start)
    return replace(active, lambda_f=recenter_lambda(active))
