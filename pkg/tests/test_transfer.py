import numpy as np
import pytest

from coherent_ratchet.errors import GridError, InvalidRate
from coherent_ratchet.heom import PropagationResult
from coherent_ratchet.icc import icc_decompose
from coherent_ratchet.model import ComplexPartition, DrudeBath, SiteHamiltonian, fmo_hamiltonian
from coherent_ratchet.transfer import (coupled_dimer_hamiltonian, cumulant_lineshape, full_coupling,
                                       icc_pair_rates, k_matrix, line_broadening, mcfret_rhs,
                                       population_sum_rule, positivity_violations, predict_acceptor_state,
                                       predict_rate_proportionality, tensor_rhs, transfer_tensor)

SMALL_GRID = np.linspace(-1500.0, 1500.0, 3072)


@pytest.fixture(scope="module")
def dimer_pair():
    h = coupled_dimer_hamiltonian(j0=5.0)
    hd, ha = h.subsystem([0, 1]), h.subsystem([2, 3])
    bath = DrudeBath()
    ed = cumulant_lineshape(hd, bath, SMALL_GRID, "donor")
    ia = cumulant_lineshape(ha, bath, SMALL_GRID, "acceptor")
    j = h.block([0, 1], [2, 3])
    return h, j, ed, ia


def test_line_broadening_starts_at_zero():
    g = line_broadening(np.array([0.0, 10.0, 100.0]), DrudeBath())
    assert g[0] == 0
    assert g[2].real > g[1].real > 0


def test_lineshape_normalization(dimer_pair):
    _, _, ed, ia = dimer_pair
    np.testing.assert_allclose(ed.normalization(), 1.0, atol=5e-3)
    np.testing.assert_allclose(ia.normalization(), 1.0, atol=5e-3)


def test_bad_grid_rejected():
    h = SiteHamiltonian(np.diag([0.0, 100.0]))
    with pytest.raises(GridError):
        cumulant_lineshape(h, DrudeBath(), np.linspace(-50, 50, 1000))
    with pytest.raises(GridError):
        cumulant_lineshape(h, DrudeBath(), np.linspace(-500, 500, 50))


def test_population_sum_rule(dimer_pair):
    _, j, ed, ia = dimer_pair
    r = transfer_tensor(full_coupling(j), k_matrix(j, ed, ia))
    assert np.max(np.abs(population_sum_rule(r))) < 1e-9 * np.max(np.abs(r))


def test_quadratic_scaling(dimer_pair):
    _, j, ed, ia = dimer_pair
    sigma = np.zeros((4, 4), complex)
    sigma[1, 1] = 1.0
    base = mcfret_rhs(sigma, ed, ia, j)
    scaled = mcfret_rhs(sigma, ed, ia, 3.0 * j)
    np.testing.assert_allclose(scaled, 9.0 * base, rtol=1e-8, atol=1e-20)


def test_mcfret_matches_tensor(dimer_pair):
    _, j, ed, ia = dimer_pair
    rng = np.random.default_rng(1)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    sig_d = a @ a.conj().T
    sig_d /= np.trace(sig_d)
    sigma = np.zeros((4, 4), complex)
    sigma[:2, :2] = sig_d
    r = transfer_tensor(full_coupling(j), k_matrix(j, ed, ia))
    via_tensor = tensor_rhs(r, sigma)
    direct = mcfret_rhs(sigma, ed, ia, j)
    np.testing.assert_allclose(direct[:2, :2], via_tensor[:2, :2], atol=1e-12 * np.abs(via_tensor).max())
    np.testing.assert_allclose(direct[2:, 2:], via_tensor[2:, 2:], atol=1e-12 * np.abs(via_tensor).max())
    # population lost by the donor arrives at the acceptor
    assert np.trace(direct).real == pytest.approx(0.0, abs=1e-12 * np.abs(via_tensor).max())


def test_structural_rates_symmetric():
    h = fmo_hamiltonian()
    part = ComplexPartition((0, 1), (2, 3, 4, 5, 6))
    icc = icc_decompose(h, part)
    rates = icc_pair_rates(icc, h.subsystem([0, 1]), h.subsystem([2, 3, 4, 5, 6]), DrudeBath(),
                           np.linspace(-1500.0, 1500.0, 3072))
    assert rates.structural
    np.testing.assert_allclose(rates.forward, rates.backward, rtol=1e-6)
    assert np.all(rates.forward > 0)


def test_predict_acceptor_state_linear_in_rate():
    t = np.arange(0.0, 50.0, 1.0)
    g = np.zeros((len(t), 2, 2), complex)
    g[:, 0, 0] = np.exp(-t / 20)
    g[:, 1, 1] = 1 - np.exp(-t / 20)
    green = PropagationResult(t, g)
    rate = np.full(len(t), 0.01)
    out = predict_acceptor_state(t, rate, green)
    np.testing.assert_allclose(np.einsum("tii->t", out).real, 0.01 * t, atol=1e-12)
    with pytest.raises(InvalidRate):
        predict_acceptor_state(t, -rate, green)
    noisy = rate.copy()
    noisy[0] = -1e-8
    clipped = noisy.copy()
    clipped[0] = 0.0
    np.testing.assert_allclose(predict_acceptor_state(t, noisy, green), predict_acceptor_state(t, clipped, green))


def test_rate_proportionality():
    p = np.linspace(0, 1, 50) ** 2
    rep = predict_rate_proportionality(p, 0.3 * p)
    assert rep.scale == pytest.approx(0.3)
    assert rep.correlation == pytest.approx(1.0)
    assert rep.residual < 1e-12


def test_positivity_flagged_not_clipped():
    rho = np.array([[0.1, 0.5], [0.5, 0.2]])
    assert positivity_violations(rho) == [(0, 1)]
    assert positivity_violations(np.diag([0.5, 0.5])) == []
