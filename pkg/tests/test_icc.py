import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from coherent_ratchet.errors import InvalidPartition
from coherent_ratchet.icc import icc_block_hamiltonian, icc_decompose, site_weights, svd_coupling
from coherent_ratchet.model import ComplexPartition, fmo_hamiltonian

# published ICC states for donor 1-2, acceptor 3-7 (sorted here by coupling)
D_34 = [0.099, -0.995]
A_34 = [-0.876, -0.254, -0.001, -0.381, -0.153]
D_19 = [0.995, 0.099]
A_19 = [0.433, -0.257, 0.342, -0.633, -0.479]


def _match_mod_sign(u, v, ref_u, ref_v, tol):
    for s in (1, -1):
        if np.allclose(s * u, ref_u, atol=tol, rtol=0) and np.allclose(s * v, ref_v, atol=tol, rtol=0):
            return True
    return False


def test_fmo_dimer_golden():
    icc = icc_decompose(fmo_hamiltonian(), ComplexPartition((0, 1), (2, 3, 4, 5, 6)))
    np.testing.assert_allclose(icc.singular_values, [34.4, 19.7], atol=0.05)
    assert _match_mod_sign(icc.donor_state(0), icc.acceptor_state(0), D_34, A_34, 1e-3)
    assert _match_mod_sign(icc.donor_state(1), icc.acceptor_state(1), D_19, A_19, 1e-3)


def test_sign_rule_and_embedding():
    icc = icc_decompose(fmo_hamiltonian(), ComplexPartition((0, 1), (2, 3, 4, 5, 6)))
    for l in range(icc.rank_count):
        a = icc.acceptor_state(l)
        assert a[np.argmax(np.abs(a))] < 0
    full = icc.embed(icc.acceptor_state(0), "acceptor", 7)
    assert full[:2].tolist() == [0.0, 0.0]
    assert np.linalg.norm(full) == pytest.approx(1.0)


def test_site8_single_donor_is_normalized_row():
    h = fmo_hamiltonian(True, 0.0)
    icc = icc_decompose(h, ComplexPartition((7,), tuple(range(7))))
    row = h.matrix[7, :7]
    assert icc.singular_values[0] == pytest.approx(np.linalg.norm(row))
    np.testing.assert_allclose(np.abs(icc.acceptor_state(0)), np.abs(row) / np.linalg.norm(row))


@settings(max_examples=120, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 5)),
              elements=st.floats(-100, 100, allow_nan=False)))
def test_reconstruction_and_orthonormality(j):
    icc = svd_coupling(j)
    np.testing.assert_allclose(icc.reconstruct(), j, atol=1e-9)
    u, v = icc.donor_unitary, icc.acceptor_unitary
    np.testing.assert_allclose(u.T @ u, np.eye(u.shape[0]), atol=1e-10)
    np.testing.assert_allclose(v.T @ v, np.eye(v.shape[0]), atol=1e-10)
    assert np.all(np.diff(icc.singular_values) <= 1e-9)


def test_rank_counts_nonzero_singular_values():
    j = np.outer([1.0, 2.0, 0.5], [3.0, -1.0, 0.0, 2.0])
    icc = svd_coupling(j)
    assert icc.rank() == 1 == np.linalg.matrix_rank(j)


def test_acceptor_permutation_equivariance():
    h = fmo_hamiltonian()
    base = icc_decompose(h, ComplexPartition((0, 1), (2, 3, 4, 5, 6)))
    perm = (5, 2, 6, 4, 3)
    other = icc_decompose(h, ComplexPartition((0, 1), perm))
    np.testing.assert_allclose(other.singular_values, base.singular_values)
    order = [p - 2 for p in perm]
    for l in range(2):
        a, b = base.acceptor_state(l)[order], other.acceptor_state(l)
        assert np.allclose(a, b, atol=1e-12) or np.allclose(a, -b, atol=1e-12)


def test_invalid_partition():
    with pytest.raises(InvalidPartition):
        icc_decompose(fmo_hamiltonian(), ComplexPartition((0, 1), (1, 2)))


def test_block_hamiltonian_is_diagonal_in_coupling():
    h = fmo_hamiltonian()
    part = ComplexPartition((0, 1), (2, 3, 4, 5, 6))
    m = icc_block_hamiltonian(h, part, icc_decompose(h, part))
    np.testing.assert_allclose(np.linalg.eigvalsh(m), np.linalg.eigvalsh(h.matrix), atol=1e-10)
    off = m[:2, 2:]
    assert abs(off[0, 0]) == pytest.approx(34.38, abs=0.01)
    assert abs(off[0, 1]) < 1e-10 and abs(off[1, 0]) < 1e-10


def test_site_weights_sum_to_one():
    w = site_weights([0.6, -0.8])
    np.testing.assert_allclose(w, [0.36, 0.64])
