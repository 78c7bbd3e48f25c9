"""Perturbative inter-complex transfer between weakly coupled complexes.

Second order in the donor-acceptor coupling ``V = J + J^T``:

* lineshape matrices of each complex from the second-order cumulant in its
  exciton basis (diagonal fluctuation projection, Drude line-broadening
  function);
* the K matrix ``K_jk = (1/4 pi) sum J_{j'k'} int dw E^{j'j}(w) I^{k'k}(w)``
  and the Redfield-like tensor ``R_abcd`` built from ``V`` and ``K``, with
  ``d sigma_ab / dt = (1/hbar^2) sum_cd R_abcd sigma_cd``;
* the coherence-propagation predictions: the acceptor state as a
  convolution of transfer events with the acceptor Green's function, and
  transfer rate proportional to the population of the ICC donor state.

Lineshapes use frequencies in cm^-1 and are normalized so that
``int I(w) dw / (2 pi hbar) = 1`` on the diagonal.

These rates are *structural*: with identical donor and acceptor lineshape
forms forward and backward rates coincide, so they do not obey detailed
balance and must not be used as thermodynamic transfer rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import units
from .errors import GridError, InvalidRate
from .heom import PropagationResult, build_hierarchy, drude_exponents, propagate
from .icc import IccDecomposition
from .model import DrudeBath, SiteHamiltonian, exciton_basis, site_projector

DEFAULT_GRID = np.linspace(-2000.0, 2000.0, 4096)
#: apodization time (fs) that gives undamped lines a finite width
APODIZATION_TIME = 1000.0
#: Matsubara terms summed explicitly in the line-broadening function
LINESHAPE_MATSUBARA = 200


@dataclass
class Lineshape:
    """Lineshape matrix ``values[w, a, b]`` on a uniform frequency grid (cm^-1)."""

    grid: np.ndarray
    values: np.ndarray
    kind: str = "acceptor"

    def normalization(self) -> np.ndarray:
        """Integral of each diagonal entry over ``w / (2 pi hbar)``."""
        diag = np.real(np.einsum("waa->wa", self.values))
        return np.trapezoid(diag, self.grid, axis=0) / (2 * np.pi * units.HBAR)


def line_broadening(t, bath: DrudeBath, matsubara: int = LINESHAPE_MATSUBARA):
    """Drude line-broadening function ``g(t)`` (dimensionless) for ``t >= 0``."""
    t = np.asarray(t, dtype=float)
    c, nu, delta = drude_exponents(bath, matsubara)
    g = np.zeros(t.shape, dtype=complex)
    for ck, vk in zip(c, nu):
        g += ck / vk**2 * (np.expm1(-vk * t) + vk * t)
    return g + delta * t


def _check_grid(grid, energies):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 3:
        raise GridError("frequency grid must be one-dimensional with >= 3 points")
    step = np.diff(grid)
    if not np.allclose(step, step[0], rtol=1e-9, atol=0) or step[0] <= 0:
        raise GridError("frequency grid must be uniform and increasing")
    if step[0] > units.HBAR / APODIZATION_TIME:
        raise GridError(f"grid spacing {step[0]:.3g} cm^-1 cannot resolve the "
                        f"narrowest line ({units.HBAR / APODIZATION_TIME:.3g} cm^-1)")
    if energies.min() < grid[0] or energies.max() > grid[-1]:
        raise GridError("exciton energies fall outside the frequency grid")
    return grid


def cumulant_lineshape(h: SiteHamiltonian, bath: DrudeBath, grid=DEFAULT_GRID,
                       kind: str = "acceptor", dt: float = 1.0) -> Lineshape:
    """Lineshape matrix of one complex in its site basis.

    In the exciton basis ``|e>`` (energy ``eps_e``) the bath-traced correlator
    is taken diagonal, ``exp(-i eps_e t / hbar - w_e g(t))``, with
    ``w_e = sum_jk U_je^2 U_ke^2 c_jk`` from the site correlation ``c``. The
    Fourier transform uses ``G(-t) = G(t)^*``.
    """
    energies, u = exciton_basis(h)
    grid = _check_grid(grid, energies)
    corr = bath.correlation_matrix(h.n_sites)
    weights = np.einsum("je,ke,jk->e", u**2, u**2, corr)

    t_max = 8.0 * APODIZATION_TIME
    t = np.arange(0.0, t_max + dt, dt)
    g = line_broadening(t, bath) if bath.reorganization_energy > 0 else np.zeros(len(t))
    apod = np.exp(-t / APODIZATION_TIME)
    quad = np.full(len(t), dt)
    quad[0] = quad[-1] = dt / 2

    spectra = np.empty((len(grid), len(energies)))
    chunk = max(1, 2_000_000 // len(t))
    for e, (eps, w) in enumerate(zip(energies, weights)):
        corr_t = np.exp(-1j * eps * t / units.HBAR - w * g) * apod * quad
        for s in range(0, len(grid), chunk):
            phase = np.exp(1j * np.outer(grid[s:s + chunk], t) / units.HBAR)
            spectra[s:s + chunk, e] = 2.0 * np.real(phase @ corr_t)
    values = np.einsum("ie,we,ke->wik", u, spectra, u).astype(complex)
    return Lineshape(grid, values, kind)


def cumulant_lineshape_acceptor(h_a: SiteHamiltonian, bath: DrudeBath, grid=DEFAULT_GRID) -> Lineshape:
    return cumulant_lineshape(h_a, bath, grid, "acceptor")


def cumulant_lineshape_donor_equilibrium(h_d: SiteHamiltonian, bath: DrudeBath,
                                         grid=DEFAULT_GRID) -> Lineshape:
    """Equilibrium (Markovian) donor lineshape; same functional form as the acceptor's."""
    return cumulant_lineshape(h_d, bath, grid, "donor")


def _coupling_block(coupling):
    if isinstance(coupling, IccDecomposition):
        return coupling.coupling_block
    return np.asarray(coupling, dtype=float)


def k_matrix(coupling, donor_ls: Lineshape, acceptor_ls: Lineshape) -> np.ndarray:
    """Donor-acceptor block ``K_jk`` (cm^-1 fs) of the second-order K operator."""
    j = _coupling_block(coupling)
    if donor_ls.grid.shape != acceptor_ls.grid.shape or not np.allclose(donor_ls.grid, acceptor_ls.grid):
        raise GridError("donor and acceptor lineshapes use different grids")
    n, m = j.shape
    if donor_ls.values.shape[1] != n or acceptor_ls.values.shape[1] != m:
        raise ValueError("lineshape dimensions do not match the coupling block")
    integrand = np.einsum("pq,wpj,wqk->wjk", j, donor_ls.values, acceptor_ls.values)
    omega = donor_ls.grid / units.HBAR
    return np.trapezoid(integrand, omega, axis=0) / (4.0 * np.pi)


def full_coupling(j) -> np.ndarray:
    """``V = J + J^T`` on the combined (donor, acceptor) space."""
    j = _coupling_block(j)
    n, m = j.shape
    v = np.zeros((n + m, n + m))
    v[:n, n:] = j
    v[n:, :n] = j.T
    return v


def hermitian_extension(k_da) -> np.ndarray:
    k_da = np.asarray(k_da)
    n, m = k_da.shape
    k = np.zeros((n + m, n + m), dtype=complex)
    k[:n, n:] = k_da
    k[n:, :n] = k_da.conj().T
    return k


def transfer_tensor(v, k) -> np.ndarray:
    """Redfield-like tensor ``R_abcd`` (cm^-2 units; divide by hbar^2 for fs^-1).

    ``k`` may be the donor-acceptor block, in which case it is extended to a
    Hermitian operator on the combined space.
    """
    v = np.asarray(v)
    k = np.asarray(k)
    if k.shape != v.shape:
        k = hermitian_extension(k)
    eye = np.eye(v.shape[0])
    vk = v @ k
    kv = k @ v
    r = (-np.einsum("db,ac->abcd", eye, vk) - np.einsum("ac,db->abcd", eye, kv)
         + np.einsum("ac,db->abcd", k, v) + np.einsum("ac,db->abcd", v, k))
    return r


def tensor_rhs(r, sigma) -> np.ndarray:
    """``d sigma / dt`` in fs^-1 from the transfer tensor."""
    return np.einsum("abcd,cd->ab", r, sigma) / units.HBAR**2


def population_sum_rule(r) -> np.ndarray:
    """``sum_a R_aabb`` for each ``b`` (zero for a probability-conserving generator)."""
    return np.einsum("aabb->b", r)


def mcfret_rhs(sigma, donor_ls: Lineshape, acceptor_ls: Lineshape, coupling) -> np.ndarray:
    """Second-order rate of change of donor and acceptor density matrix elements.

    ``sigma`` is the donor density matrix (``n x n``) or a state on the
    combined space whose donor block is used. The time-dependent donor
    lineshape is replaced by its Markovian limit
    ``E^{j'j}(w) = sum_j'' Ecal^{j'j''}(w) sigma_{j j''}``. Returns the
    combined-space matrix with donor and acceptor blocks filled and the
    donor-acceptor coherence block left at zero.
    """
    j = _coupling_block(coupling)
    n, m = j.shape
    sigma = np.asarray(sigma, dtype=complex)
    sig_d = sigma[:n, :n] if sigma.shape[0] == n + m else sigma
    ecal = donor_ls.values
    omega = donor_ls.grid / units.HBAR
    pref = 1.0 / (4.0 * np.pi * units.HBAR**2)

    e_t = np.einsum("wpq,jq->wpj", ecal, sig_d)   # E^{j'j} = (Ecal sigma^T)_{j'j}
    integ = lambda x: np.trapezoid(x, omega, axis=0)
    # acceptor block: X_kk' = sum J_{j'k''} J_{jk} E^{j'j} I^{k''k'}, plus its adjoint
    x = pref * integ(np.einsum("pq,jk,wpj,wqr->wkr", j, j, e_t, acceptor_ls.values))
    d_acc = x + x.conj().T
    # donor block: Y_jj' = sum J_{j''k'} J_{jk} E^{j''j'*} I^{kk'}, minus it and its adjoint
    e_adj = np.conj(np.swapaxes(e_t, 1, 2))
    y = pref * integ(np.einsum("sq,jk,wps,wkq->wjp", j, j, e_adj, acceptor_ls.values))
    d_don = -(y + y.conj().T)

    out = np.zeros((n + m, n + m), dtype=complex)
    out[:n, :n] = d_don
    out[n:, n:] = d_acc
    return out


def positivity_violations(rho, tol: float = 1e-12) -> list:
    """Index pairs ``(a, b)`` with ``|rho_ab|^2 > rho_aa rho_bb`` (unphysical coherences)."""
    rho = np.asarray(rho)
    p = np.real(np.diag(rho))
    bad = []
    for a in range(len(p)):
        for b in range(a + 1, len(p)):
            if abs(rho[a, b]) ** 2 > max(p[a], 0) * max(p[b], 0) + tol:
                bad.append((a, b))
    return bad


@dataclass
class StructuralRates:
    """Population transfer rates (fs^-1) of each ICC pair, forward and backward."""

    forward: np.ndarray
    backward: np.ndarray
    structural: bool = field(default=True, init=False)


def icc_pair_rates(decomposition: IccDecomposition, h_d: SiteHamiltonian, h_a: SiteHamiltonian,
                   bath: DrudeBath, grid=DEFAULT_GRID) -> StructuralRates:
    """Rate out of each ICC donor state, and the reverse rate with roles exchanged."""
    ed = cumulant_lineshape_donor_equilibrium(h_d, bath, grid)
    ia = cumulant_lineshape_acceptor(h_a, bath, grid)
    j = decomposition.coupling_block
    n, m = j.shape

    def rates(coupling, d_ls, a_ls, vectors):
        v = full_coupling(coupling)
        r = transfer_tensor(v, k_matrix(coupling, d_ls, a_ls))
        nn = coupling.shape[0]
        out = []
        for vec in vectors.T:
            sigma = np.zeros_like(v, dtype=complex)
            sigma[:nn, :nn] = np.outer(vec, vec)
            out.append(np.real(np.trace(tensor_rhs(r, sigma)[nn:, nn:])))
        return np.array(out)

    fwd = rates(j, ed, ia, decomposition.donor_vectors)
    # exchange: acceptor complex now donates, with the acceptor-form lineshape of each side
    ia_back = cumulant_lineshape_acceptor(h_d, bath, grid)
    ed_back = cumulant_lineshape_donor_equilibrium(h_a, bath, grid)
    bwd = rates(j.T, ed_back, ia_back, decomposition.acceptor_vectors)
    return StructuralRates(fwd, bwd)


def predict_acceptor_state(times, rate, green: PropagationResult) -> np.ndarray:
    """Acceptor density matrix from transfer events convolved with the Green's function.

    ``rho_A(t_i) = sum_j w_j rate(t_j) G(t_i - t_j) rho_A*`` with trapezoid
    weights ``w_j``; ``green.states[i]`` must hold ``G(t_i) rho_A*`` on the
    same uniform grid as ``times``.
    """
    times = np.asarray(times, dtype=float)
    rate = np.asarray(rate, dtype=float)
    # finite-difference noise around zero is clipped; real negative rates are rejected
    tol = max(1e-12, 1e-4 * np.abs(rate).max(initial=0.0))
    if rate.min(initial=0.0) < -tol:
        raise InvalidRate(f"negative transfer rate {rate.min():.3g} fs^-1")
    rate = np.clip(rate, 0.0, None)
    if len(green.times) < len(times) or not np.allclose(green.times[: len(times)], times):
        raise ValueError("Green's function must be sampled on the same time grid")
    dt = times[1] - times[0]
    g = green.states
    out = np.zeros((len(times),) + g.shape[1:], dtype=complex)
    for i in range(1, len(times)):
        w = np.full(i + 1, dt)
        w[0] = w[-1] = dt / 2
        out[i] = np.tensordot(w * rate[: i + 1], g[i::-1], axes=1)
    return out


@dataclass
class RateProportionality:
    scale: float
    residual: float
    correlation: float


def predict_rate_proportionality(donor_population, rate) -> RateProportionality:
    """Least-squares fit ``rate ~ scale * p_D*`` and the Pearson correlation."""
    p = np.asarray(donor_population, dtype=float)
    r = np.asarray(rate, dtype=float)
    if p.shape != r.shape:
        raise ValueError("time series must be aligned")
    denom = float(p @ p)
    scale = float(p @ r) / denom if denom > 0 else 0.0
    residual = float(np.sqrt(np.mean((r - scale * p) ** 2)))
    if np.std(p) == 0 or np.std(r) == 0:
        corr = 1.0 if residual == 0 else 0.0
    else:
        corr = float(np.corrcoef(p, r)[0, 1])
    return RateProportionality(scale, residual, corr)


def normalized(states, eps: float = 1e-300) -> np.ndarray:
    tr = np.real(np.einsum("tii->t", states))
    return states / np.maximum(tr, eps)[:, None, None]


def rms_element_error(a, b) -> float:
    return float(np.sqrt(np.mean(np.abs(np.asarray(a) - np.asarray(b)) ** 2)))


@dataclass
class BenchmarkResult:
    """Coupled-dimer test of coherence propagation (direct HEOM vs. prediction)."""

    times: np.ndarray
    rate: np.ndarray
    donor_population: np.ndarray
    simulated: np.ndarray
    predicted: np.ndarray
    report: RateProportionality
    rms_error: float
    t_min: float


def coupled_dimer_hamiltonian(e1=200.0, e2=320.0, j=-87.7, j0=1.0) -> SiteHamiltonian:
    """Two identical dimers (sites 1-2, 3-4) linked by ``j0 |2><3|``."""
    d = np.array([[0.0, j], [j, e2 - e1]])
    h = np.kron(np.eye(2), d)
    h[1, 2] = h[2, 1] = j0
    return SiteHamiltonian(h)


def coherence_propagation_benchmark(bath: DrudeBath = None, j0: float = 1.0, t_final: float = 1000.0,
                                    dt: float = 0.5, depth: int = 8, matsubara: int = 1,
                                    save_every: int = 2, t_min: float = 5.0) -> BenchmarkResult:
    """Run the coupled-dimer comparison.

    The donor ICC state is site 2 and the acceptor ICC state site 3; the
    system starts on site 1. The transfer rate is the time derivative of the
    simulated acceptor population and feeds both predictions. Normalized
    acceptor states are compared for ``t >= t_min`` where the acceptor
    population is nonzero.
    """
    bath = bath or DrudeBath()
    h = coupled_dimer_hamiltonian(j0=j0)
    full = propagate(build_hierarchy(h, bath, depth, matsubara), site_projector(4, 0),
                     t_final, dt, save_every=save_every)
    t = full.times
    pops = full.populations
    p_acc = pops[:, 2] + pops[:, 3]
    rate = np.gradient(p_acc, t, edge_order=2)
    rate = np.where((rate < 0) & (rate > -1e-12), 0.0, rate)

    h_a = h.subsystem([2, 3])
    green = propagate(build_hierarchy(h_a, bath, depth, matsubara), site_projector(2, 0),
                      t_final, dt, save_every=save_every)
    predicted = predict_acceptor_state(t, rate, green)
    simulated = full.states[:, 2:, 2:]
    mask = t >= t_min
    err = rms_element_error(normalized(simulated[mask]), normalized(predicted[mask]))
    report = predict_rate_proportionality(pops[:, 1], rate)
    return BenchmarkResult(t, rate, pops[:, 1], simulated, predicted, report, err, t_min)
