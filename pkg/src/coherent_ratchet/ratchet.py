"""Heterodimer-chain ratchet: rate extraction, semi-Markov walk and asymptotics.

Chain geometry
--------------
Each dimer has a low-energy *left* site and a high-energy *right* site. The
right site of dimer ``n`` couples weakly (strength ``J``) to the left site of
dimer ``n + 1``. A walker sitting on the left site has coin ``eps = +1``, on
the right site ``eps = -1``. A hop ``delta = +1`` moves one dimer to the
right and lands on that dimer's left site, so the new coin is ``eps' =
delta``. Positive drift means transport towards the uphill intra-dimer step.

Array convention
----------------
Every ``(eps, delta)`` array is indexed ``[i, k]`` with index 0 for ``+1`` and
index 1 for ``-1``, i.e. in the order ``++, +-, -+, --``.

Rates
-----
Three-dimer HEOM runs with a tiny coupling ``J0`` give the populations
``F0[eps, delta](t)`` of the outer dimers. Their smoothed derivative is the
perturbative transfer rate, which is rescaled by ``(J / J0)^2``. Because the
small-``J0`` run never depletes the initial dimer, the rescaled rate is a
hazard: the probability density of the first hop is ``f = h S`` with survival
``S = exp(-int sum_delta h)``. Beyond the simulated grid each hazard is
continued as a constant fitted on the final 20% of the grid.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import curve_fit
from scipy.signal import savgol_filter
from scipy.sparse.csgraph import connected_components
from scipy.stats import kurtosis, skew, spearmanr

from . import units
from .errors import DegenerateChain, FitFailure, GridTooShort, InvalidRate, NotApplicable
from .heom import PropagationResult, build_hierarchy, exciton_coherence, propagate
from .model import DrudeBath, SiteHamiltonian, dimer_correlation, site_projector

logger = logging.getLogger(__name__)

SIGNS = (1, -1)
#: points in the Savitzky-Golay smoothing window for dF/dt
SMOOTHING_WINDOW = 11
SMOOTHING_ORDER = 3
#: fraction of the grid used to fit the constant tail hazard
TAIL_FRACTION = 0.2
#: largest probability mass allowed beyond the simulated grid
MAX_TAIL_MASS = 0.1
NEGATIVE_RATE_FLOOR = -1e-9


def _idx(sign: int) -> int:
    if sign not in SIGNS:
        raise ValueError(f"expected +1 or -1, got {sign}")
    return 0 if sign == 1 else 1


# ---------------------------------------------------------------- chain model

@dataclass(frozen=True)
class DimerParams:
    """Site energies (cm^-1) and intra-dimer coupling of one heterodimer."""

    e_left: float = 200.0
    e_right: float = 320.0
    coupling: float = -87.7

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[0.0, self.coupling], [self.coupling, self.e_right - self.e_left]])


@dataclass(frozen=True)
class ChainSettings:
    """Numerical settings for the three-dimer HEOM runs."""

    t_final: float = 10000.0
    dt: float = 0.5
    save_every: int = 4
    depth: int = 4
    matsubara: int = 0
    j0: float = 1.0


def chain_hamiltonian(params: DimerParams, j0: float, n_dimers: int = 3) -> SiteHamiltonian:
    """Chain of identical dimers; sites ordered (left, right) per dimer."""
    h = np.kron(np.eye(n_dimers), params.matrix)
    for n in range(n_dimers - 1):
        h[2 * n + 1, 2 * n + 2] = h[2 * n + 2, 2 * n + 1] = j0
    return SiteHamiltonian(h)


def chain_bath(bath: DrudeBath, spatial_correlation: float = 0.0, n_dimers: int = 3) -> DrudeBath:
    """Copy of ``bath`` with intra-dimer cross correlation ``c`` on a chain."""
    if spatial_correlation == 0.0:
        return bath.with_changes(site_correlation=None)
    return bath.with_changes(site_correlation=dimer_correlation(n_dimers, spatial_correlation))


@dataclass
class ChainPopulations:
    """Outer-dimer populations ``F0[eps, delta](t)`` from the small-``J0`` runs."""

    times: np.ndarray
    populations: np.ndarray
    j0: float


def simulate_chain(params: DimerParams, bath: DrudeBath, settings: ChainSettings = ChainSettings(),
                   spatial_correlation: float = 0.0) -> ChainPopulations:
    """Run the two three-dimer propagations (walker on the left or right site)."""
    h = chain_hamiltonian(params, settings.j0)
    hier = build_hierarchy(h, chain_bath(bath, spatial_correlation), settings.depth,
                           settings.matsubara)
    out = []
    for eps in SIGNS:
        start = 2 if eps == 1 else 3
        res = propagate(hier, site_projector(6, start), settings.t_final, settings.dt,
                        save_every=settings.save_every)
        p = res.populations
        out.append([p[:, 4] + p[:, 5], p[:, 0] + p[:, 1]])
    return ChainPopulations(res.times, np.array(out), settings.j0)


# ---------------------------------------------------------------- rate tables

def transfer_hazard(times, f0_cumulative, j0: float, j: float,
                    window: int = SMOOTHING_WINDOW, order: int = SMOOTHING_ORDER) -> np.ndarray:
    """Rescaled rate ``(J/J0)^2 dF0/dt`` (fs^-1) on a uniform grid.

    The derivative uses a Savitzky-Golay filter with mirrored edges, which
    keeps the rate at ``t = 0`` at zero for the even short-time expansion of
    ``F0``.
    """
    times = np.asarray(times, dtype=float)
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=0):
        raise ValueError("rate extraction needs a uniform time grid")
    rate0 = savgol_filter(np.asarray(f0_cumulative, dtype=float), window, order, deriv=1,
                          delta=dt, axis=-1, mode="mirror")
    return (j / j0) ** 2 * rate0


@dataclass
class RateTable:
    """Time-resolved hop statistics of the semi-Markov walk.

    Attributes
    ----------
    times : ndarray
        Nondecreasing grid (fs) starting at 0. A repeated time encodes a jump
        of ``F``.
    cumulative : ndarray, shape (2, 2, nt)
        ``F[eps, delta](t)``, the probability that the first hop from coin
        ``eps`` is ``delta`` and happens before ``t``.
    tail_rates : ndarray, shape (2, 2)
        Constant hazards (fs^-1) continuing each channel beyond the grid.
    coupling : float
        Inter-dimer coupling ``J`` (cm^-1) the table describes.
    hazard : ndarray, optional
        Rescaled transfer rates ``(J/J0)^2 f0`` before survival weighting.
    metadata : dict
        Physical parameters recorded in the file header.
    """

    times: np.ndarray
    cumulative: np.ndarray
    tail_rates: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    coupling: float = float("nan")
    hazard: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.cumulative = np.asarray(self.cumulative, dtype=float)
        self.tail_rates = np.asarray(self.tail_rates, dtype=float)
        t, big_f = self.times, self.cumulative
        if t.ndim != 1 or t[0] != 0.0 or np.any(np.diff(t) < 0):
            raise InvalidRate("time grid must start at 0 and be nondecreasing")
        if big_f.shape != (2, 2, len(t)):
            raise InvalidRate(f"cumulative table has shape {big_f.shape}, expected (2, 2, {len(t)})")
        if np.any(big_f[..., 0] != 0.0):
            raise InvalidRate("F(0) must vanish")
        if np.any(np.diff(big_f, axis=-1) < -1e-12):
            raise InvalidRate("cumulative probabilities must be nondecreasing")
        if np.any(self.tail_rates < 0):
            raise InvalidRate("tail hazards must be nonnegative")
        total = self.p.sum(axis=1)
        if np.any(total > 1 + 1e-6) or np.any(total < 0.99):
            raise InvalidRate(f"hop probabilities per coin sum to {total}, expected within [0.99, 1]")

    @property
    def remaining(self) -> np.ndarray:
        """Probability per coin that no hop happened on the grid."""
        left = 1.0 - self.cumulative[..., -1].sum(axis=1)
        return np.clip(left, 0.0, None)

    @property
    def p(self) -> np.ndarray:
        """Limiting hop probabilities ``p[eps, delta]``, tail included."""
        p = self.cumulative[..., -1].copy()
        for i in range(2):
            h = self.tail_rates[i].sum()
            if h > 0:
                p[i] += self.remaining[i] * self.tail_rates[i] / h
        return p

    @property
    def density(self) -> np.ndarray:
        """Hop densities ``f = dF/dt`` (fs^-1), piecewise constant on grid cells."""
        dt = np.diff(self.times)
        dF = np.diff(self.cumulative, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(dt > 0, dF / np.where(dt > 0, dt, 1.0), 0.0)
        return np.concatenate([f, f[..., -1:]], axis=-1)

    def transition_matrix(self) -> np.ndarray:
        """Coin Markov matrix ``P[eps, eps']``; the next coin equals ``delta``."""
        return self.p

    def time_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """``E(t)`` and ``E(t^2)`` per channel, conditional on that hop.

        Cells are integrated exactly for the piecewise-linear ``F`` that the
        sampler inverts, and the exponential tail is added analytically.
        """
        t = self.times
        a, b = t[:-1], t[1:]
        dF = np.diff(self.cumulative, axis=-1)
        m1 = (dF * (a + b) / 2).sum(axis=-1)
        m2 = (dF * (a * a + a * b + b * b) / 3).sum(axis=-1)
        tg = t[-1]
        for i in range(2):
            h = self.tail_rates[i].sum()
            if h <= 0:
                continue
            r = self.remaining[i] * self.tail_rates[i]
            m1[i] += r * (tg / h + 1 / h**2)
            m2[i] += r * (tg**2 / h + 2 * tg / h**2 + 2 / h**3)
        p = self.p
        with np.errstate(invalid="ignore", divide="ignore"):
            e1 = np.where(p > 0, m1 / np.where(p > 0, p, 1), 0.0)
            e2 = np.where(p > 0, m2 / np.where(p > 0, p, 1), 0.0)
        return e1, e2

    def inverse_cdf(self, i: int, k: int, u: np.ndarray) -> np.ndarray:
        """Hop times solving ``u = F[i, k](t) / p[i, k]`` (bisection + linear interpolation)."""
        u = np.asarray(u, dtype=float)
        p = self.p[i, k]
        target = u * p
        big_f = self.cumulative[i, k]
        t = self.times
        out = np.empty_like(target)
        on_grid = target <= big_f[-1]
        j = np.searchsorted(big_f, target[on_grid], side="left")
        j = np.clip(j, 1, len(t) - 1)
        f_lo, f_hi = big_f[j - 1], big_f[j]
        width = f_hi - f_lo
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(width > 0, (target[on_grid] - f_lo) / np.where(width > 0, width, 1), 1.0)
        out[on_grid] = t[j - 1] + np.clip(frac, 0, 1) * (t[j] - t[j - 1])
        if np.any(~on_grid):
            h_tot = self.tail_rates[i].sum()
            mass = self.remaining[i] * self.tail_rates[i, k] / h_tot
            x = np.clip((target[~on_grid] - big_f[-1]) / mass, 0.0, 1.0 - 1e-16)
            out[~on_grid] = t[-1] - np.log1p(-x) / h_tot
        return out

    def to_text(self) -> str:
        """Serialize as a commented header plus ``time, f_pp, f_pm, f_mp, f_mm`` rows."""
        buf = io.StringIO()
        buf.write("# coherent-ratchet rate table v1\n")
        meta = dict(self.metadata)
        meta["coupling_cm-1"] = self.coupling
        meta["tail_rates_fs-1"] = " ".join(repr(float(x)) for x in self.tail_rates.ravel())
        meta["p_limit"] = " ".join(repr(float(x)) for x in self.p.ravel())
        for key in sorted(meta):
            buf.write(f"# {key}: {meta[key]}\n")
        buf.write("time_fs,f_pp,f_pm,f_mp,f_mm\n")
        f = self.density.reshape(4, -1)
        for n, t in enumerate(self.times):
            buf.write(",".join(f"{x:.17g}" for x in (t, *f[:, n])) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "RateTable":
        meta, rows = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                if ":" in line:
                    key, _, value = line[1:].partition(":")
                    meta[key.strip()] = value.strip()
            elif line.strip() and not line.startswith("time"):
                rows.append([float(x) for x in line.split(",")])
        data = np.array(rows)
        t, f = data[:, 0], data[:, 1:].T.reshape(2, 2, -1)
        dt = np.diff(t)
        big_f = np.concatenate([np.zeros((2, 2, 1)), np.cumsum(f[..., :-1] * dt, axis=-1)], axis=-1)
        tail = np.array([float(x) for x in meta.pop("tail_rates_fs-1").split()]).reshape(2, 2)
        coupling = float(meta.pop("coupling_cm-1"))
        meta.pop("p_limit", None)
        return cls(t, big_f, tail, coupling, None, meta)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "RateTable":
        with open(path) as fh:
            return cls.from_text(fh.read())


def rate_table_from_hazard(times, hazard, coupling: float, metadata: Optional[dict] = None) -> RateTable:
    """Build the hop distribution from rescaled hazards ``h[eps, delta](t)``.

    Raises
    ------
    InvalidRate
        If a smoothed rate falls below the numerical noise floor.
    GridTooShort
        If more than ``MAX_TAIL_MASS`` of a coin's hops fall beyond the grid.
    """
    times = np.asarray(times, dtype=float)
    hazard = np.asarray(hazard, dtype=float)
    if hazard.min() < NEGATIVE_RATE_FLOOR:
        raise InvalidRate(f"smoothed transfer rate {hazard.min():.3g} fs^-1 is negative; "
                          "refine the grid or widen the smoothing window")
    hazard = np.clip(hazard, 0.0, None)
    integrated = cumulative_trapezoid(hazard.sum(axis=1), times, axis=-1, initial=0.0)
    survival = np.exp(-integrated)
    density = hazard * survival[:, None, :]
    big_f = cumulative_trapezoid(density, times, axis=-1, initial=0.0)
    big_f = np.maximum.accumulate(big_f, axis=-1)
    left = 1.0 - big_f[..., -1].sum(axis=1)
    if np.any(left > MAX_TAIL_MASS):
        raise GridTooShort(f"{left.max():.1%} of hops happen after {times[-1]:.0f} fs; "
                           "extend the propagation time")
    start = int(len(times) * (1 - TAIL_FRACTION))
    tail = hazard[..., start:].mean(axis=-1)
    return RateTable(times, big_f, tail, coupling, hazard, dict(metadata or {}))


def extract_rates(params: DimerParams = DimerParams(), bath: DrudeBath = DrudeBath(), j: float = 15.0,
                  settings: ChainSettings = ChainSettings(), spatial_correlation: float = 0.0,
                  populations: Optional[ChainPopulations] = None) -> RateTable:
    """Inter-dimer hop statistics for coupling ``j`` from small-``J0`` chain runs.

    ``populations`` may be supplied to reuse an earlier :func:`simulate_chain`.
    """
    if populations is None:
        populations = simulate_chain(params, bath, settings, spatial_correlation)
    hazard = transfer_hazard(populations.times, populations.populations, populations.j0, j)
    meta = {
        "e_left_cm-1": params.e_left, "e_right_cm-1": params.e_right,
        "intra_coupling_cm-1": params.coupling, "j0_cm-1": populations.j0,
        "reorganization_energy_cm-1": bath.reorganization_energy,
        "correlation_time_fs": bath.correlation_time, "temperature_K": bath.temperature,
        "spatial_correlation": spatial_correlation, "heom_depth": settings.depth,
        "heom_matsubara": settings.matsubara, "heom_dt_fs": settings.dt,
        "smoothing_window": SMOOTHING_WINDOW, "smoothing_order": SMOOTHING_ORDER,
    }
    return rate_table_from_hazard(populations.times, hazard, j, meta)


def exponential_table(probabilities, rates, t_max: Optional[float] = None, n_points: int = 20001) -> RateTable:
    """Table with ``F[eps, delta] = p (1 - exp(-r t))`` (synthetic walks)."""
    p = np.asarray(probabilities, dtype=float)
    r = np.asarray(rates, dtype=float)
    if t_max is None:
        t_max = 40.0 / r.min()
    t = np.linspace(0.0, t_max, n_points)
    big_f = p[..., None] * -np.expm1(-r[..., None] * t)
    left = 1.0 - big_f[..., -1].sum(axis=1)
    # tail hazards that reproduce the remaining mass split of each coin
    tail = np.where(p > 0, r, 0.0) * np.where(left[:, None] > 0, 1.0, 0.0)
    return RateTable(t, big_f, tail, metadata={"kind": "exponential"})


def ballistic_table(step_time: float, p_forward=(1.0, 1.0)) -> RateTable:
    """Deterministic hop after exactly ``step_time`` fs."""
    t = np.array([0.0, step_time, step_time, 2 * step_time])
    big_f = np.zeros((2, 2, 4))
    for i, pf in enumerate(p_forward):
        big_f[i, 0, 2:] = pf
        big_f[i, 1, 2:] = 1.0 - pf
    return RateTable(t, big_f, metadata={"kind": "ballistic"})


# ---------------------------------------------------------------- asymptotics

def limiting_distribution(p_matrix) -> np.ndarray:
    """Stationary coin distribution ``pi = pi P``.

    Raises
    ------
    DegenerateChain
        If the chain has more than one closed communicating class.
    """
    p = np.asarray(p_matrix, dtype=float)
    rows = p.sum(axis=1, keepdims=True)
    if np.any(np.abs(rows - 1) > 1e-6):
        raise DegenerateChain(f"rows of P sum to {rows.ravel()}, not 1")
    p = p / rows
    n_comp, label = connected_components(p > 1e-14, directed=True, connection="strong")
    # transient coins are harmless; several closed classes make pi non-unique
    closed = [c for c in range(n_comp)
              if not np.any(p[np.ix_(label == c, label != c)] > 1e-14)]
    if len(closed) > 1:
        raise DegenerateChain("coin chain has several closed classes; limiting distribution is not unique")
    a = np.vstack([(p.T - np.eye(len(p))), np.ones(len(p))])
    b = np.zeros(len(p) + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(a, b, rcond=None)[0]
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


@dataclass
class Move:
    """One possible step of a Markov-renewal walk."""

    start: int
    end: int
    probability: float
    displacement: float
    mean_time: float
    second_moment: float


def renewal_asymptotics(moves: Sequence[Move], n_coins: int, total_time: float,
                        convention: str = "column") -> dict:
    """Asymptotic mean and variance of displacement for a Markov-renewal walk.

    The coin Markov chain has ``P[a, b] = sum`` of probabilities of moves
    ``a -> b``. ``convention`` selects ``P*[a, b] = P[a, b] - pi[b]``
    (``"column"``) or ``- pi[a]`` (``"row"``) in ``Q = (1 - P*)^-1``.
    """
    p = np.zeros((n_coins, n_coins))
    for m in moves:
        p[m.start, m.end] += m.probability
    pi = limiting_distribution(p)
    weights = np.array([pi[m.start] * m.probability for m in moves])
    xi = np.array([[m.displacement, m.mean_time] for m in moves])
    n_bar, t_bar = weights @ xi
    if t_bar <= 0:
        raise DegenerateChain("mean step time must be positive")

    var_eta = np.zeros((2, 2))
    var_eta[1, 1] = sum(w * (m.second_moment - m.mean_time**2) for w, m in zip(weights, moves))
    mu = xi - np.array([n_bar, t_bar])

    if convention == "column":
        p_star = p - pi[None, :]
    elif convention == "row":
        p_star = p - pi[:, None]
    else:
        raise ValueError("convention must be 'column' or 'row'")
    try:
        q = np.linalg.inv(np.eye(n_coins) - p_star)
    except np.linalg.LinAlgError as exc:
        raise DegenerateChain("1 - P* is singular") from exc

    # outgoing mean deviation per coin, g[a] = sum_{moves from a} p mu
    g = np.zeros((n_coins, 2))
    for m, row in zip(moves, mu):
        g[m.start] += m.probability * row
    var_mu = np.einsum("m,mi,mj->ij", weights, mu, mu)
    ends = np.array([m.end for m in moves])
    cross = np.einsum("m,mi,mr,rj->ij", weights, mu, q[ends], g)
    var_mu += cross + cross.T
    var_xi = var_eta + var_mu

    proj = np.array([1.0, -n_bar / t_bar])
    var_nt = float(proj @ var_xi @ proj) * total_time / t_bar
    return {"pi": pi, "n_bar": n_bar, "t_bar": t_bar, "var_xi": var_xi,
            "mean": n_bar * total_time / t_bar, "variance": var_nt}


def _table_moves(rates: RateTable) -> list[Move]:
    p = rates.p
    e1, e2 = rates.time_moments()
    moves = []
    for i, eps in enumerate(SIGNS):
        for k, delta in enumerate(SIGNS):
            moves.append(Move(i, k, p[i, k], float(delta), e1[i, k], e2[i, k]))
    return moves


@dataclass
class WalkStatistics:
    """Drift and spreading of the walk after ``total_time`` fs.

    ``drift`` is in dimer hops per ps and ``diffusion`` in nm^2/ps with the
    hop length ``spacing_nm``.
    """

    method: str
    total_time: float
    mean_position: float
    variance_position: float
    pi: np.ndarray
    spacing_nm: float = units.DIMER_SPACING_NM
    standard_error: Optional[float] = None
    positions: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    @property
    def drift(self) -> float:
        return self.mean_position / self.total_time * 1000.0

    @property
    def drift_nm_per_ps(self) -> float:
        return self.drift * self.spacing_nm

    @property
    def diffusion(self) -> float:
        return self.variance_position * self.spacing_nm**2 / (2 * self.total_time) * 1000.0

    @property
    def delta_pi(self) -> float:
        return float(self.pi[0] - self.pi[-1])

    def sigma_nm(self, time: float = 1e6) -> float:
        """Spatial standard deviation (nm) extrapolated to ``time`` fs."""
        return float(np.sqrt(self.variance_position * time / self.total_time) * self.spacing_nm)

    def histogram(self):
        if self.positions is None:
            return None
        lo, hi = int(self.positions.min()), int(self.positions.max())
        edges = np.arange(lo, hi + 2) - 0.5
        counts, _ = np.histogram(self.positions, edges)
        return np.arange(lo, hi + 1), counts


def analytic_moments(rates: RateTable, total_time: float = 1e6, convention: str = "column",
                     spacing_nm: float = units.DIMER_SPACING_NM) -> WalkStatistics:
    """Closed-form asymptotic drift and variance of the semi-Markov walk."""
    res = renewal_asymptotics(_table_moves(rates), 2, total_time, convention)
    return WalkStatistics("analytic", total_time, res["mean"], res["variance"], res["pi"],
                          spacing_nm, extra={"n_bar": res["n_bar"], "t_bar": res["t_bar"],
                                             "var_xi": res["var_xi"], "convention": convention})


def rate_asymmetry(rates: RateTable, pi=None, hazard: bool = False) -> np.ndarray:
    """``A(t) = sum pi delta f / sum pi f``; NaN where the denominator vanishes."""
    if pi is None:
        pi = limiting_distribution(rates.transition_matrix())
    f = rates.hazard if hazard and rates.hazard is not None else rates.density
    weighted = np.einsum("i,ikt->kt", np.asarray(pi), f)
    num = weighted[0] - weighted[1]
    den = weighted[0] + weighted[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


# ---------------------------------------------------------------- Monte Carlo

BUFFER_STEPS = 256


class _Streams:
    """One independent PCG64 stream per trajectory, drawn in blocks."""

    def __init__(self, seed: int, first: int, count: int):
        self.gens = [np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(first + i,))))
                     for i in range(count)]
        self.buf = np.empty((count, BUFFER_STEPS, 2))
        self.pos = BUFFER_STEPS

    def draw(self, active: np.ndarray) -> np.ndarray:
        if self.pos == BUFFER_STEPS:
            for i in np.flatnonzero(active):
                self.buf[i] = self.gens[i].random((BUFFER_STEPS, 2))
            self.pos = 0
        u = self.buf[:, self.pos]
        self.pos += 1
        return u


def simulate_walk(sampler: Callable, start_coin: int, total_time: float, n_traj: int, seed: int,
                  first_trajectory: int = 0, max_steps: int = 10_000_000) -> np.ndarray:
    """Generic synchronous Monte Carlo loop; returns final positions.

    ``sampler(coin, u1, u2) -> (new_coin, displacement, waiting_time)`` acts
    on arrays. ``start_coin`` is a coin index or a function mapping one
    uniform per trajectory to a coin. Trajectory ``i`` draws from its own stream seeded by
    ``(seed, i)``, so any split into blocks via ``first_trajectory`` gives
    the same trajectories.
    """
    streams = _Streams(seed, first_trajectory, n_traj)
    if callable(start_coin):
        coin = np.asarray(start_coin(streams.draw(np.ones(n_traj, dtype=bool))[:, 0]), dtype=int)
    else:
        coin = np.full(n_traj, start_coin, dtype=int)
    pos = np.zeros(n_traj)
    clock = np.zeros(n_traj)
    active = np.ones(n_traj, dtype=bool)
    for _ in range(max_steps):
        if not active.any():
            break
        u = streams.draw(active)
        idx = np.flatnonzero(active)
        new_coin, step, wait = sampler(coin[idx], u[idx, 0], u[idx, 1])
        arrive = clock[idx] + wait
        done = arrive > total_time
        move = idx[~done]
        pos[move] += step[~done]
        clock[move] = arrive[~done]
        coin[move] = new_coin[~done]
        active[idx[done]] = False
    else:
        raise RuntimeError("walk did not finish within max_steps")
    return pos


def _table_sampler(rates: RateTable):
    p = rates.p

    def sample(coin, u1, u2):
        forward = u1 <= p[coin, 0]
        k = np.where(forward, 0, 1)
        wait = np.empty(len(coin))
        for i in range(2):
            for kk in range(2):
                sel = (coin == i) & (k == kk)
                if sel.any():
                    wait[sel] = rates.inverse_cdf(i, kk, u2[sel])
        return k, np.where(forward, 1.0, -1.0), wait

    return sample


def _summarize(positions, total_time, pi, spacing_nm, method="monte-carlo", extra=None) -> WalkStatistics:
    n = len(positions)
    mean = float(positions.mean())
    var = float(positions.var(ddof=1)) if n > 1 else 0.0
    extra = dict(extra or {})
    if var > 0:
        extra["skewness"] = float(skew(positions))
        extra["excess_kurtosis"] = float(kurtosis(positions))
    return WalkStatistics(method, total_time, mean, var, np.asarray(pi), spacing_nm,
                          standard_error=float(np.sqrt(var / n)), positions=positions, extra=extra)


def monte_carlo_walk(rates: RateTable, total_time: float = 1e6, n_traj: int = 5000, seed: int = 0,
                     start_coin: int = 1, first_trajectory: int = 0,
                     spacing_nm: float = units.DIMER_SPACING_NM) -> WalkStatistics:
    """Sample walk positions after ``total_time`` fs, starting at ``(n, t) = (0, 0)``."""
    positions = simulate_walk(_table_sampler(rates), _idx(start_coin), total_time, n_traj, seed,
                              first_trajectory)
    pi = limiting_distribution(rates.transition_matrix())
    return _summarize(positions, total_time, pi, spacing_nm,
                      extra={"seed": seed, "n_traj": n_traj, "rng": "PCG64 per trajectory"})


def compare_walks(mc: WalkStatistics, analytic: WalkStatistics, n_sigma: float = 3.0,
                  var_rtol: float = 0.1) -> dict:
    """MC vs analytic agreement: mean within ``n_sigma`` SE, variance within ``var_rtol``."""
    diff = abs(mc.mean_position - analytic.mean_position)
    se = mc.standard_error or 0.0
    mean_ok = diff <= n_sigma * se or diff <= 1e-9 * max(1.0, abs(analytic.mean_position))
    scale = max(abs(analytic.variance_position), 1e-12)
    var_err = abs(mc.variance_position - analytic.variance_position) / scale
    var_ok = var_err <= var_rtol or abs(mc.variance_position - analytic.variance_position) <= 1e-9
    return {"mean_difference": diff, "standard_error": se, "mean_ok": bool(mean_ok),
            "variance_relative_error": var_err, "variance_ok": bool(var_ok)}


# ---------------------------------------------------------------- classical baseline

def classical_moves(delta_e: float, temperature: float, p_intra: float, uphill_rate: float = 1e-3) -> list[Move]:
    """Nearest-neighbour Markov walk obeying detailed balance.

    Coin 0 is the low-energy state and coin 1 the high-energy state of a
    dimer. From the low state the walker goes up within the dimer (``p``) or
    to the high state of the left neighbour (``1 - p``); from the high state
    it goes down within the dimer or to the low state of the right
    neighbour. Downhill rates are the uphill ones times ``exp(beta dE)``.
    """
    if not 0 <= p_intra <= 1:
        raise ValueError("p_intra must lie in [0, 1]")
    k_low = uphill_rate
    k_high = uphill_rate * np.exp(delta_e * units.beta(temperature))
    moves = []
    for coin, k, hop in ((0, k_low, -1.0), (1, k_high, 1.0)):
        mean, second = 1.0 / k, 2.0 / k**2
        moves.append(Move(coin, 1 - coin, p_intra, 0.0, mean, second))
        moves.append(Move(coin, 1 - coin, 1.0 - p_intra, hop, mean, second))
    return moves


def classical_baseline(delta_e: float, temperature: float, p_intra: float, total_time: float = 1e6,
                       n_traj: int = 5000, seed: int = 0, uphill_rate: float = 1e-3,
                       spacing_nm: float = units.DIMER_SPACING_NM) -> tuple[WalkStatistics, WalkStatistics]:
    """Analytic and Monte Carlo statistics of the detailed-balance walk."""
    moves = classical_moves(delta_e, temperature, p_intra, uphill_rate)
    # coins alternate low/high, so pi = (1/2, 1/2) and the mean displacement per
    # step, ((1 - p)(-1) + (1 - p)(+1)) / 2, vanishes identically
    pi = np.array([0.5, 0.5])
    n_bar = 0.5 * (1 - p_intra) * (-1.0) + 0.5 * (1 - p_intra) * 1.0
    t_bar = 0.5 * (moves[0].mean_time + moves[2].mean_time)
    if p_intra == 1.0:
        var = 0.0
    else:
        var = renewal_asymptotics(moves, 2, total_time)["variance"]
    analytic = WalkStatistics("analytic", total_time, n_bar * total_time / t_bar, var, pi, spacing_nm)

    k = np.array([1.0 / moves[0].mean_time, 1.0 / moves[2].mean_time])
    hop = np.array([-1.0, 1.0])

    def sample(coin, u1, u2):
        inter = u1 > p_intra
        return 1 - coin, np.where(inter, hop[coin], 0.0), -np.log1p(-u2) / k[coin]

    # start in thermal equilibrium of the dimer, which makes the walk stationary
    p_high = 1.0 / (1.0 + np.exp(delta_e * units.beta(temperature)))
    positions = simulate_walk(sample, lambda u: (u < p_high).astype(int), total_time, n_traj, seed)
    mc = _summarize(positions, total_time, pi, spacing_nm, extra={"seed": seed, "n_traj": n_traj})
    return analytic, mc


# ---------------------------------------------------------------- coherence time

@dataclass
class CoherenceFit:
    tau: float
    amplitude: float
    offset: float
    residual: float


def fit_exponential_decay(times, signal, t_min: float = 100.0) -> CoherenceFit:
    """Least-squares fit ``y ~ A exp(-t / tau) + B`` for ``t > t_min``."""
    times = np.asarray(times, dtype=float)
    signal = np.asarray(signal, dtype=float)
    mask = times > t_min
    t, y = times[mask], signal[mask]
    diag = {"n_points": int(mask.sum()), "t_min": t_min}
    if len(t) < 4:
        raise FitFailure("too few points after t_min", diag)
    spread = y.max() - y.min()
    diag["spread"] = float(spread)
    if spread <= 1e-12 * max(1.0, abs(y).max()):
        raise FitFailure("signal does not decay", diag)
    t0 = t[0]
    guess = (y[0] - y[-1], max((t[-1] - t0) / 3, 1e-3), y[-1])

    def model(x, a, tau, b):
        return a * np.exp(-(x - t0) / tau) + b

    try:
        popt, _ = curve_fit(model, t, y, p0=guess, maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitFailure(f"least squares did not converge: {exc}", diag) from exc
    a, tau, b = popt
    diag.update(amplitude=float(a), tau=float(tau), offset=float(b))
    if not np.isfinite(tau) or tau <= 0 or tau > 1e6:
        raise FitFailure(f"fitted decay time {tau:.3g} fs is not a decay", diag)
    residual = float(np.sqrt(np.mean((model(t, *popt) - y) ** 2)))
    return CoherenceFit(float(tau), float(a * np.exp(t0 / tau)), float(b), residual)


def coherence_time(result: PropagationResult, h, t_min: float = 100.0) -> CoherenceFit:
    """Decay time of the coherence between the two lowest excitons of ``h``."""
    return fit_exponential_decay(result.times, exciton_coherence(result, h), t_min)


def dimer_coherence_run(params: DimerParams, bath: DrudeBath, spatial_correlation: float = 0.0,
                        t_final: float = 1500.0, depth: int = 8, matsubara: int = 1,
                        dt: float = 0.5) -> tuple[SiteHamiltonian, PropagationResult]:
    """Isolated dimer started on its left site."""
    h = SiteHamiltonian(params.matrix)
    b = chain_bath(bath, spatial_correlation, n_dimers=1)
    res = propagate(build_hierarchy(h, b, depth, matsubara), site_projector(2, 0), t_final, dt,
                    save_every=2)
    return h, res


# ---------------------------------------------------------------- scans

@dataclass
class ScanRow:
    parameter: str
    value: float
    tau: float
    drift: float
    diffusion: float
    delta_pi: float
    sigma_1ns: float

    def as_tuple(self):
        return (self.value, self.tau, self.drift, self.diffusion, self.delta_pi, self.sigma_1ns)


SCAN_COLUMNS = ("value", "coherence_time_fs", "drift_hops_per_ps", "diffusion_nm2_per_ps",
                "delta_pi", "sigma_1ns_nm")


def scan_point(parameter: str, value: float, params: DimerParams, bath: DrudeBath, j: float,
               settings: ChainSettings) -> tuple[ScanRow, RateTable]:
    if parameter == "tc":
        bath, corr = bath.with_changes(correlation_time=value), 0.0
    elif parameter == "corr":
        corr = value
    else:
        raise ValueError("parameter must be 'tc' or 'corr'")
    if bath.reorganization_energy == 0:
        raise NotApplicable("lambda = 0: excitation never localizes on a neighbour, "
                            "transfer never completes")
    table = extract_rates(params, bath, j, settings, corr)
    stats = analytic_moments(table)
    h, run = dimer_coherence_run(params, bath, corr)
    fit = coherence_time(run, h)
    row = ScanRow(parameter, float(value), fit.tau, stats.drift, stats.diffusion, stats.delta_pi,
                  stats.sigma_nm(1e6))
    return row, table


def scan_coherence_vs_drift(parameter: str, values: Sequence[float], params: DimerParams = DimerParams(),
                            bath: DrudeBath = DrudeBath(), j: float = 15.0,
                            settings: ChainSettings = ChainSettings()) -> list[ScanRow]:
    """Coherence time and walk statistics across a correlation-time or spatial-correlation scan."""
    if bath.reorganization_energy == 0:
        raise NotApplicable("lambda = 0: excitation never localizes on a neighbour, "
                            "transfer never completes")
    rows = []
    for v in values:
        row, _ = scan_point(parameter, v, params, bath, j, settings)
        logger.info("scan %s=%g: tau=%.1f fs, v=%.4g hops/ps", parameter, v, row.tau, row.drift)
        rows.append(row)
    return rows


def trend_report(rows: Sequence[ScanRow]) -> dict:
    """Spearman correlation of drift with coherence time and the low-coherence drift ratio."""
    tau = np.array([r.tau for r in rows])
    v = np.array([r.drift for r in rows])
    rho = float(spearmanr(tau, v).statistic) if len(rows) > 2 else float("nan")
    ratio = float(abs(v[np.argmin(tau)]) / v.max()) if v.max() > 0 else float("inf")
    return {"spearman": rho, "smallest_tau_ratio": ratio}
