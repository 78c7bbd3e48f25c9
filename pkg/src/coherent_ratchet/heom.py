"""Hierarchical equations of motion for Drude-Lorentz baths.

Each site couples linearly to a harmonic bath with the overdamped
Brownian-oscillator spectral density. The bath correlation function

    C(t) = lambda gamma (cot(beta hbar gamma / 2) - i) exp(-gamma t)
           + sum_k c_k exp(-nu_k t),    nu_k = 2 pi k / (beta hbar)

is truncated after ``matsubara`` Matsubara terms; the remaining terms are
folded into a Markovian terminator ``-Delta [V, [V, rho]]``. Auxiliary
density operators (ADOs) are rescaled so that every hierarchy coupling is of
order ``sqrt(n |c|)``, which keeps deep tiers well conditioned.

Spatially correlated baths are handled by diagonalizing the site-correlation
matrix: every eigenvector with nonzero eigenvalue ``w`` defines one
independent effective bath coupled through ``sqrt(w) sum_j u_j |j><j|``.

Internally energies are converted to angular frequencies (rad/fs).
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import units
from .errors import IntegrationFailure, InvalidBath
from .model import DrudeBath, SiteHamiltonian, check_density_matrix, exciton_basis

logger = logging.getLogger(__name__)

MODE_CUTOFF = 1e-10


def drude_exponents(bath: DrudeBath, matsubara: int):
    """Exponential decomposition of the Drude correlation function.

    Returns ``(c, nu, delta)``: amplitudes (fs^-2), decay rates (fs^-1) and
    the terminator strength (fs^-1) for the Matsubara terms left out.
    """
    lam = bath.reorganization_energy / units.HBAR
    gamma = bath.gamma
    bh = units.HBAR / units.thermal_energy(bath.temperature)  # beta hbar in fs
    c = [lam * gamma * (1.0 / np.tan(bh * gamma / 2.0) - 1j)]
    nu = [gamma]
    for k in range(1, matsubara + 1):
        vk = 2.0 * np.pi * k / bh
        c.append(4.0 * lam * gamma * vk / (bh * (vk**2 - gamma**2)) + 0j)
        nu.append(vk)
    c = np.array(c)
    nu = np.array(nu)
    # sum over all Matsubara terms of c_k / nu_k, minus those kept explicitly
    total = lam * (2.0 / (bh * gamma) - 1.0 / np.tan(bh * gamma / 2.0))
    delta = total - float(np.sum(c[1:].real / nu[1:]))
    return c, nu, delta


def bath_modes(bath: DrudeBath, n_sites: int) -> np.ndarray:
    """Diagonal coupling vectors (rows) of the independent effective baths."""
    corr = bath.correlation_matrix(n_sites)
    if np.allclose(corr, np.eye(n_sites), atol=0, rtol=0):
        return np.eye(n_sites)
    w, u = np.linalg.eigh(corr)
    if w.min() < -MODE_CUTOFF:
        raise InvalidBath("site correlation is not positive semidefinite")
    keep = w > MODE_CUTOFF
    modes = (u[:, keep] * np.sqrt(w[keep])).T
    return modes[::-1]


def enumerate_indices(n_slots: int, depth: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``n_slots`` with sum <= depth.

    Ordered by tier, so every index appears after its parents.
    """
    out = []
    for tier in range(depth + 1):
        # stars and bars: choose positions of the dividers
        for bars in itertools.combinations(range(tier + n_slots - 1), n_slots - 1):
            prev = -1
            vec = []
            for b in bars:
                vec.append(b - prev - 1)
                prev = b
            vec.append(tier + n_slots - 1 - prev - 1)
            out.append(vec)
    return np.array(out, dtype=np.int64).reshape(-1, n_slots)


@dataclass
class AdoHierarchy:
    """Index set, couplings and Liouvillian of a truncated hierarchy.

    Slot ``j`` of an index vector is bath mode ``j // (matsubara + 1)`` and
    exponential term ``j % (matsubara + 1)``.
    """

    hamiltonian: SiteHamiltonian
    bath: DrudeBath
    depth: int
    matsubara: int
    modes: np.ndarray
    amplitudes: np.ndarray
    rates: np.ndarray
    terminator: float
    indices: np.ndarray
    up: np.ndarray
    down: np.ndarray
    generator: sp.csr_matrix = field(repr=False)

    @property
    def n_sites(self) -> int:
        return self.hamiltonian.n_sites

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    @property
    def n_slots(self) -> int:
        return self.indices.shape[1]

    @property
    def n_ados(self) -> int:
        return self.indices.shape[0]

    def expected_count(self) -> int:
        return comb(self.n_slots + self.depth, self.depth)

    def max_frequency(self) -> float:
        """Largest Bohr frequency of the system (rad/fs)."""
        w = np.linalg.eigvalsh(self.hamiltonian.matrix)
        return (w.max() - w.min()) / units.HBAR


def _neighbour_tables(indices: np.ndarray):
    lookup = {tuple(row): i for i, row in enumerate(indices)}
    n, s = indices.shape
    up = -np.ones((n, s), dtype=np.int64)
    down = -np.ones((n, s), dtype=np.int64)
    for i, row in enumerate(indices):
        vec = list(row)
        for j in range(s):
            vec[j] += 1
            up[i, j] = lookup.get(tuple(vec), -1)
            vec[j] -= 2
            if vec[j] >= 0:
                down[i, j] = lookup[tuple(vec)]
            vec[j] += 1
    return up, down


def _build_generator(h_ang, modes, c, nu, delta, indices, up, down):
    n = h_ang.shape[0]
    n2 = n * n
    n_ado, n_slots = indices.shape
    nk = len(c)
    eye = np.eye(n)
    lh = -1j * (np.kron(h_ang, eye) - np.kron(eye, h_ang.T))

    # element-wise patterns of [V, X] and V X - c* X V for diagonal V
    diff = [(v[:, None] - v[None, :]).ravel() for v in modes]

    damping = indices @ np.tile(nu, len(modes))
    term = np.zeros(n2)
    for d in diff:
        term += delta * d**2
    blocks = sp.kron(sp.identity(n_ado, format="csr"), sp.csr_matrix(lh), format="csr")
    diag = -(np.repeat(damping, n2) + np.tile(term, n_ado))

    rows, cols, vals = [np.arange(n_ado * n2)], [np.arange(n_ado * n2)], [diag.astype(complex)]
    elem = np.arange(n2)
    for j in range(n_slots):
        a, k = divmod(j, nk)
        ck = c[k]
        if abs(ck) == 0.0:
            continue
        v = modes[a]
        comm = diff[a]
        left_right = (ck * v[:, None] - np.conj(ck) * v[None, :]).ravel()

        has_up = np.nonzero(up[:, j] >= 0)[0]
        if len(has_up):
            coef = -1j * np.sqrt((indices[has_up, j] + 1) * abs(ck))
            nz = np.nonzero(comm)[0]
            r = (has_up[:, None] * n2 + elem[nz][None, :]).ravel()
            cc = (up[has_up, j][:, None] * n2 + elem[nz][None, :]).ravel()
            vals.append((coef[:, None] * comm[nz][None, :]).ravel())
            rows.append(r)
            cols.append(cc)

        has_down = np.nonzero(down[:, j] >= 0)[0]
        if len(has_down):
            coef = -1j * np.sqrt(indices[has_down, j] / abs(ck))
            nz = np.nonzero(left_right)[0]
            r = (has_down[:, None] * n2 + elem[nz][None, :]).ravel()
            cc = (down[has_down, j][:, None] * n2 + elem[nz][None, :]).ravel()
            vals.append((coef[:, None] * left_right[nz][None, :]).ravel())
            rows.append(r)
            cols.append(cc)

    size = n_ado * n2
    coupling = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size))
    return (blocks + coupling).tocsr()


def build_hierarchy(h: SiteHamiltonian, bath: DrudeBath, depth: int = 8, matsubara: int = 1,
                    terminator: bool = True) -> AdoHierarchy:
    """Assemble the truncated hierarchy for ``h`` coupled to ``bath``.

    Parameters
    ----------
    depth : int
        Truncation tier ``L``; ADOs with total index above ``L`` are dropped.
    matsubara : int
        Number ``K`` of explicit Matsubara terms per bath.
    terminator : bool
        Whether to add the Markovian correction for the omitted Matsubara terms.
    """
    if depth < 1:
        raise ValueError("hierarchy depth must be >= 1")
    if matsubara < 0:
        raise ValueError("matsubara count must be >= 0")
    modes = bath_modes(bath, h.n_sites)
    c, nu, delta = drude_exponents(bath, matsubara)
    if not terminator:
        delta = 0.0
    n_slots = modes.shape[0] * (matsubara + 1)
    indices = enumerate_indices(n_slots, depth)
    up, down = _neighbour_tables(indices)
    h_ang = h.matrix / units.HBAR
    gen = _build_generator(h_ang, modes, c, nu, delta, indices, up, down)
    logger.debug("hierarchy: %d ADOs, %d slots, nnz=%d", len(indices), n_slots, gen.nnz)
    return AdoHierarchy(h, bath, depth, matsubara, modes, c, nu, delta, indices, up, down, gen)


@dataclass
class PropagationResult:
    times: np.ndarray
    states: np.ndarray

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.einsum("tii->ti", self.states))

    def traces(self) -> np.ndarray:
        return np.einsum("tii->t", self.states)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.states - np.conj(np.swapaxes(self.states, 1, 2)))))

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        return self.states[i]


def _rk4(gen, y, dt, n_steps, save_every, n_keep, check_every=200):
    # only the reduced density matrix (first n_keep entries) is stored
    saved = [y[:n_keep].copy()]
    half = 0.5 * dt
    for step in range(1, n_steps + 1):
        k1 = gen @ y
        k2 = gen @ (y + half * k1)
        k3 = gen @ (y + half * k2)
        k4 = gen @ (y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % check_every == 0 or step == n_steps:
            if not np.all(np.isfinite(y)):
                raise IntegrationFailure(
                    f"non-finite hierarchy state at step {step} (t={step * dt:.3f} fs); "
                    f"max |y| before failure unknown, try a smaller dt",
                    step=step, time=step * dt)
        if step % save_every == 0:
            saved.append(y[:n_keep].copy())
    return saved


def propagate(hierarchy: AdoHierarchy, sigma0, t_final: float, dt: float = 0.5,
              save_every: int = 1, method: str = "rk4", rtol: float = 1e-10,
              atol: float = 1e-13) -> PropagationResult:
    """Integrate the hierarchy from ``sigma0`` (bath at equilibrium).

    ``method="rk4"`` uses fixed steps of ``dt``; ``method="adaptive"`` uses
    an embedded 8th-order Runge-Kutta scheme and reports on the same output
    grid (spacing ``dt * save_every``).
    """
    sigma0 = check_density_matrix(sigma0)
    n = hierarchy.n_sites
    if sigma0.shape != (n, n):
        raise ValueError(f"initial state is {sigma0.shape}, system has {n} sites")
    if dt <= 0 or t_final < 0:
        raise ValueError("dt must be positive and t_final nonnegative")
    wmax = hierarchy.max_frequency()
    if wmax > 0 and dt > 1.0 / (10.0 * wmax):
        warnings.warn(f"dt={dt} fs does not resolve the fastest beat (period "
                      f"{2 * np.pi / wmax:.1f} fs)", RuntimeWarning, stacklevel=2)
    n_steps = int(round(t_final / dt))
    y0 = np.zeros(hierarchy.n_ados * n * n, dtype=complex)
    y0[: n * n] = sigma0.ravel()
    gen = hierarchy.generator

    if method == "rk4":
        # divergence is reported as IntegrationFailure, not as overflow warnings
        with np.errstate(over="ignore", invalid="ignore"):
            saved = _rk4(gen, y0, dt, n_steps, save_every, n * n)
        times = dt * save_every * np.arange(len(saved))
        states = np.array(saved).reshape(-1, n, n)
    elif method == "adaptive":
        from scipy.integrate import solve_ivp

        times = dt * save_every * np.arange(n_steps // save_every + 1)
        sol = solve_ivp(lambda t, y: gen @ y, (0.0, times[-1]), y0, method="DOP853",
                        t_eval=times, rtol=rtol, atol=atol)
        if not sol.success:
            raise IntegrationFailure(f"adaptive integration failed: {sol.message}")
        states = sol.y[: n * n].T.reshape(-1, n, n)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(states)):
        raise IntegrationFailure("non-finite reduced density matrix")
    return PropagationResult(times, states)


def unitary_propagate(h: SiteHamiltonian, sigma0, t_grid) -> PropagationResult:
    """Exact closed-system evolution ``exp(-iHt) sigma0 exp(iHt)``."""
    sigma0 = np.asarray(sigma0, dtype=complex)
    t_grid = np.asarray(t_grid, dtype=float)
    w, v = exciton_basis(h)
    rho_e = v.T @ sigma0 @ v
    phase = np.exp(-1j * np.outer(t_grid, w) / units.HBAR)
    evolved = phase[:, :, None] * rho_e[None] * np.conj(phase)[:, None, :]
    states = np.einsum("ij,tjk,lk->til", v, evolved, v)
    return PropagationResult(t_grid, states)


def exciton_coherence(result: PropagationResult, h, pair=(0, 1)) -> np.ndarray:
    """``|rho_{e1 e2}(t)|`` between two excitons (lowest pair by default)."""
    _, v = exciton_basis(h)
    a, b = pair
    return np.abs(np.einsum("i,tij,j->t", v[:, a], result.states, v[:, b]))


def to_exciton_basis(result: PropagationResult, h) -> np.ndarray:
    _, v = exciton_basis(h)
    return np.einsum("ia,tij,jb->tab", v, result.states, v)
