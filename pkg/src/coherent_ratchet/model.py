"""Physical data types for excitonic networks and the built-in FMO dataset.

Energies are in cm^-1 and times in fs throughout (see :mod:`.units`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import units
from .errors import InvalidBath, InvalidPartition, MissingParameter

# FMO monomer of C. tepidum, cm^-1 relative to 12210 cm^-1. Site 8 couplings
# are in the last row/column; its energy is unknown and must be supplied.
FMO_ENERGY_OFFSET = 12210.0
_FMO_8 = np.array([
    [200.0, -87.7, 5.5, -5.9, 6.7, -13.7, -9.9, 37.5],
    [-87.7, 320.0, 30.8, 8.2, 0.7, 11.8, 4.3, 6.5],
    [5.5, 30.8, 0.0, -53.5, -2.2, -9.6, 6.0, 1.3],
    [-5.9, 8.2, -53.5, 110.0, -70.7, -17.0, -63.3, -1.8],
    [6.7, 0.7, -2.2, -70.7, 270.0, 81.1, -1.3, 4.3],
    [-13.7, 11.8, -9.6, -17.0, 81.1, 420.0, 39.7, -9.5],
    [-9.9, 4.3, 6.0, -63.3, -1.3, 39.7, 230.0, -11.3],
    [37.5, 6.5, 1.3, -1.8, 4.3, -9.5, -11.3, np.nan],
])


@dataclass(frozen=True)
class SiteHamiltonian:
    """Real symmetric single-excitation Hamiltonian in the site basis."""

    matrix: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ValueError(f"Hamiltonian must be a nonempty square matrix, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("Hamiltonian has non-finite entries")
        if not np.allclose(m, m.T, atol=1e-12, rtol=0):
            raise ValueError("Hamiltonian is not symmetric")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        labels = tuple(self.labels) or tuple(str(i + 1) for i in range(m.shape[0]))
        if len(labels) != m.shape[0]:
            raise ValueError("number of labels does not match Hamiltonian size")
        object.__setattr__(self, "labels", labels)

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0]

    def block(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        return self.matrix[np.ix_(list(rows), list(cols))]

    def subsystem(self, sites: Sequence[int]) -> "SiteHamiltonian":
        sites = list(sites)
        return SiteHamiltonian(self.block(sites, sites), tuple(self.labels[i] for i in sites))


@dataclass(frozen=True)
class ComplexPartition:
    """Zero-based donor and acceptor site index sets."""

    donor_sites: tuple
    acceptor_sites: tuple

    def __post_init__(self):
        object.__setattr__(self, "donor_sites", tuple(int(i) for i in self.donor_sites))
        object.__setattr__(self, "acceptor_sites", tuple(int(i) for i in self.acceptor_sites))

    def validate(self, n_sites: int) -> None:
        d, a = self.donor_sites, self.acceptor_sites
        if not d or not a:
            raise InvalidPartition("donor and acceptor sets must be nonempty")
        if len(set(d)) != len(d) or len(set(a)) != len(a):
            raise InvalidPartition("repeated site index in partition")
        if set(d) & set(a):
            raise InvalidPartition(f"donor and acceptor overlap on sites {sorted(set(d) & set(a))}")
        for i in d + a:
            if not 0 <= i < n_sites:
                raise InvalidPartition(f"site index {i} out of range for {n_sites} sites")


@dataclass(frozen=True)
class DrudeBath:
    """Overdamped Brownian-oscillator (Drude-Lorentz) bath on every site.

    Parameters
    ----------
    reorganization_energy : float
        lambda in cm^-1.
    correlation_time : float
        tau_c in fs; the bath relaxation rate is ``1 / tau_c``.
    temperature : float
        Kelvin.
    site_correlation : array, optional
        Cross-correlation coefficients between site baths. ``None`` means
        independent baths (identity).
    """

    reorganization_energy: float = 35.0
    correlation_time: float = 50.0
    temperature: float = 300.0
    site_correlation: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.reorganization_energy < 0:
            raise InvalidBath("reorganization energy must be >= 0")
        if self.correlation_time <= 0:
            raise InvalidBath("correlation time must be > 0")
        if self.temperature <= 0:
            raise InvalidBath("temperature must be > 0")
        if self.site_correlation is not None:
            c = np.array(self.site_correlation, dtype=float)
            if c.ndim != 2 or c.shape[0] != c.shape[1]:
                raise InvalidBath("site correlation must be a square matrix")
            if not np.allclose(c, c.T, atol=1e-12, rtol=0):
                raise InvalidBath("site correlation must be symmetric")
            if not np.allclose(np.diag(c), 1.0, atol=1e-12, rtol=0):
                raise InvalidBath("site correlation must have unit diagonal")
            if np.linalg.eigvalsh(c).min() < -1e-10:
                raise InvalidBath("site correlation is not positive semidefinite")
            c.setflags(write=False)
            object.__setattr__(self, "site_correlation", c)

    @property
    def gamma(self) -> float:
        """Bath relaxation rate in fs^-1."""
        return 1.0 / self.correlation_time

    def correlation_matrix(self, n_sites: int) -> np.ndarray:
        if self.site_correlation is None:
            return np.eye(n_sites)
        if self.site_correlation.shape[0] != n_sites:
            raise InvalidBath(
                f"site correlation is {self.site_correlation.shape[0]}x"
                f"{self.site_correlation.shape[0]}, system has {n_sites} sites")
        return np.array(self.site_correlation)

    def with_changes(self, **kw) -> "DrudeBath":
        params = dict(reorganization_energy=self.reorganization_energy,
                      correlation_time=self.correlation_time,
                      temperature=self.temperature,
                      site_correlation=self.site_correlation)
        params.update(kw)
        return DrudeBath(**params)


def dimer_correlation(n_dimers: int, c: float) -> np.ndarray:
    """Block-diagonal site correlation with coefficient ``c`` inside each dimer."""
    block = np.array([[1.0, c], [c, 1.0]])
    return np.kron(np.eye(n_dimers), block)


def fmo_hamiltonian(include_site8: bool = False, site8_energy: Optional[float] = None) -> SiteHamiltonian:
    """FMO monomer Hamiltonian (cm^-1 above 12210 cm^-1).

    The 8th BChl has no published site energy, so ``site8_energy`` is required
    whenever ``include_site8`` is true.
    """
    if include_site8:
        if site8_energy is None:
            raise MissingParameter("site 8 energy is unknown; supply site8_energy")
        m = _FMO_8.copy()
        m[7, 7] = site8_energy
        return SiteHamiltonian(m)
    return SiteHamiltonian(_FMO_8[:7, :7].copy())


def dimer_hamiltonian(theta: float, delta_e: float) -> SiteHamiltonian:
    """Dimer Hamiltonian ``R(theta) diag(0, dE) R(-theta)``.

    The lower exciton is ``(cos, -sin)`` and the upper exciton ``(sin, cos)``.
    """
    if delta_e < 0:
        raise ValueError("delta_e must be >= 0")
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, s], [-s, c]])
    return SiteHamiltonian(rot @ np.diag([0.0, delta_e]) @ rot.T)


def dimer_from_sites(e1: float, e2: float, j: float) -> tuple[float, float]:
    """Mixing angle and exciton splitting of a dimer given site parameters.

    Returns ``(theta, delta_e)`` with ``theta`` in (-pi/2, pi/2]. With this
    convention site 2 carries the larger share of the upper exciton whenever
    ``e2 > e1``; ``dimer_hamiltonian(theta, delta_e)`` equals the site matrix
    up to a global energy shift.
    """
    delta_e = float(np.hypot(e2 - e1, 2.0 * j))
    if delta_e == 0.0:
        return 0.0, 0.0
    theta = 0.5 * float(np.arctan2(2.0 * j, e2 - e1))
    if theta <= -np.pi / 2:
        theta += np.pi
    return theta, delta_e


def exciton_basis(h) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and eigenvectors (columns) of a Hamiltonian.

    Each eigenvector is signed so that its largest-magnitude component is
    positive (first such component on ties).
    """
    m = h.matrix if isinstance(h, SiteHamiltonian) else np.asarray(h, dtype=float)
    w, v = np.linalg.eigh(m)
    idx = np.argmax(np.abs(v) - 1e-12 * np.arange(v.shape[0])[:, None], axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return w, v * signs


def site_projector(n: int, i: int) -> np.ndarray:
    """Density matrix ``|i><i|`` (zero-based) on ``n`` sites."""
    rho = np.zeros((n, n), dtype=complex)
    rho[i, i] = 1.0
    return rho


def pure_state(vector) -> np.ndarray:
    v = np.asarray(vector, dtype=complex)
    return np.outer(v, v.conj())


def check_density_matrix(rho, atol: float = 1e-10) -> np.ndarray:
    """Validate a (possibly sub-normalized) density matrix and return it as complex."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=atol, rtol=0):
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr.imag) > atol or not (-atol <= tr.real <= 1 + 1e-9):
        raise ValueError(f"density matrix trace {tr} outside [0, 1]")
    return rho


def thermal_state(h, temperature: float) -> np.ndarray:
    """Boltzmann state ``exp(-H/kT) / Z`` of the electronic Hamiltonian."""
    w, v = exciton_basis(h)
    p = np.exp(-(w - w.min()) * units.beta(temperature))
    p /= p.sum()
    return (v * p) @ v.T + 0j
