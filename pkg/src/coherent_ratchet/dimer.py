"""Closed-form coherent and thermal site populations of a model dimer.

"Site 2" is the second basis vector of :func:`.model.dimer_hamiltonian`, so
for positive mixing energies it carries most of the upper exciton.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import units
from .model import dimer_from_sites


@dataclass(frozen=True)
class DimerPoint:
    theta: float
    delta_e: float
    temperature: float = 300.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")

    @classmethod
    def from_sites(cls, e1, e2, j, temperature=300.0):
        theta, delta_e = dimer_from_sites(e1, e2, j)
        return cls(theta, delta_e, temperature)


def p_thermal(point: DimerPoint):
    """Thermal population of site 2, ``<2|exp(-beta H)|2> / Z``."""
    x = np.asarray(point.delta_e) * units.beta(point.temperature)
    c2, s2 = np.cos(point.theta) ** 2, np.sin(point.theta) ** 2
    # (c2 + e^x s2) / (1 + e^x), written without overflow
    return c2 * expit(-x) + s2 * expit(x)


def p_coherent(point: DimerPoint, initial_site: int = 1):
    """Long-time average site-2 population under unitary evolution."""
    mixed = 2.0 * np.cos(point.theta) ** 2 * np.sin(point.theta) ** 2
    if initial_site == 1:
        return mixed
    if initial_site == 2:
        return 1.0 - mixed
    raise ValueError("initial_site must be 1 or 2")


def participation_ratio(theta):
    """Inverse participation ratio ``1 / (sin^4 + cos^4)`` of the dimer excitons."""
    return 1.0 / (np.sin(theta) ** 4 + np.cos(theta) ** 4)


def advantage_scan(theta_grid, delta_e_grid, temperature=300.0, initial_site=1):
    """``p_coherent - p_thermal`` on a grid; rows follow ``delta_e_grid``."""
    theta_grid = np.asarray(theta_grid, dtype=float)
    delta_e_grid = np.asarray(delta_e_grid, dtype=float)
    if theta_grid.size == 0 or delta_e_grid.size == 0:
        raise ValueError("scan grids must be nonempty")
    th, de = np.meshgrid(theta_grid, delta_e_grid)
    point = DimerPoint(th, de, temperature)
    return p_coherent(point, initial_site) - p_thermal(point)


def advantage_rows(theta_grid, delta_e_grid, temperature=300.0, initial_site=1):
    """Flatten :func:`advantage_scan` into ``(theta, delta_e, p_coh, p_th, diff)`` rows."""
    rows = []
    for de in np.asarray(delta_e_grid, dtype=float):
        for th in np.asarray(theta_grid, dtype=float):
            pt = DimerPoint(th, de, temperature)
            pc, ptm = float(p_coherent(pt, initial_site)), float(p_thermal(pt))
            rows.append((th, de, pc, ptm, pc - ptm))
    return rows
