"""Inter-complex coupling (ICC) basis by singular value decomposition.

The coupling block ``J[j, k] = <D_j|H|A_k>`` between a donor and an acceptor
complex is factored as ``J = U_D diag(s) U_A^T``. Column ``l`` of ``U_D``
(``U_A``) is the ICC donor (acceptor) state that carries coupling ``s[l]``.

Sign convention: SVD vectors are fixed only up to a simultaneous sign flip of
each (donor, acceptor) pair. We flip pairs so that the largest-magnitude
component of every acceptor vector is negative, which reproduces the signs of
all published FMO acceptor states. Complement vectors (beyond ``min(n, m)``)
follow the same rule on their own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidPartition
from .model import ComplexPartition, SiteHamiltonian


@dataclass(frozen=True)
class IccDecomposition:
    singular_values: np.ndarray
    donor_unitary: np.ndarray
    acceptor_unitary: np.ndarray
    coupling_block: np.ndarray
    partition: ComplexPartition

    @property
    def rank_count(self) -> int:
        return len(self.singular_values)

    @property
    def donor_vectors(self) -> np.ndarray:
        return self.donor_unitary[:, : self.rank_count]

    @property
    def acceptor_vectors(self) -> np.ndarray:
        return self.acceptor_unitary[:, : self.rank_count]

    def reconstruct(self) -> np.ndarray:
        return (self.donor_vectors * self.singular_values) @ self.acceptor_vectors.T

    def donor_state(self, l: int) -> np.ndarray:
        return self.donor_vectors[:, l]

    def acceptor_state(self, l: int) -> np.ndarray:
        return self.acceptor_vectors[:, l]

    def embed(self, vector, side: str, n_sites: int) -> np.ndarray:
        """Place a donor/acceptor vector into the full site space."""
        sites = self.partition.donor_sites if side == "donor" else self.partition.acceptor_sites
        out = np.zeros(n_sites)
        out[list(sites)] = vector
        return out

    def rank(self, tol: float = 1e-10) -> int:
        if not len(self.singular_values):
            return 0
        return int(np.sum(self.singular_values > tol * max(self.singular_values[0], 1e-300)))


def _largest_component_sign(v: np.ndarray) -> float:
    i = np.argmax(np.abs(v) - 1e-12 * np.arange(len(v)))
    return 1.0 if v[i] >= 0 else -1.0


def svd_coupling(j_block, partition=None) -> IccDecomposition:
    """ICC decomposition of an explicit rectangular coupling block."""
    j_block = np.asarray(j_block, dtype=float)
    n, m = j_block.shape
    u, s, vt = np.linalg.svd(j_block, full_matrices=True)
    v = vt.T
    r = min(n, m)

    # order ties (within roundoff) lexicographically by donor components
    scale = max(s[0], 1.0) if r else 1.0
    keys = [(-round(s[l] / scale, 12), tuple(-u[:, l])) for l in range(r)]
    order = sorted(range(r), key=lambda l: keys[l])
    u = np.concatenate([u[:, order], u[:, r:]], axis=1)
    v = np.concatenate([v[:, order], v[:, r:]], axis=1)
    s = s[order]

    for l in range(r):
        if _largest_component_sign(v[:, l]) > 0:
            u[:, l] *= -1
            v[:, l] *= -1
    for l in range(r, n):
        if _largest_component_sign(u[:, l]) > 0:
            u[:, l] *= -1
    for l in range(r, m):
        if _largest_component_sign(v[:, l]) > 0:
            v[:, l] *= -1

    if partition is None:
        partition = ComplexPartition(tuple(range(n)), tuple(range(n, n + m)))
    return IccDecomposition(s, u, v, j_block, partition)


def icc_decompose(h: SiteHamiltonian, partition: ComplexPartition) -> IccDecomposition:
    """Compute the ICC basis for the donor/acceptor split of ``h``."""
    if not isinstance(partition, ComplexPartition):
        raise InvalidPartition("partition must be a ComplexPartition")
    partition.validate(h.n_sites)
    j_block = h.block(partition.donor_sites, partition.acceptor_sites)
    return svd_coupling(j_block, partition)


def icc_block_hamiltonian(h: SiteHamiltonian, partition: ComplexPartition,
                          decomposition: IccDecomposition) -> np.ndarray:
    """Electronic Hamiltonian of the two complexes expressed in the ICC basis.

    Rows/columns are ordered donor ICC states first, then acceptor ICC
    states. The off-diagonal block is the rectangular diagonal ``diag(s)``.
    """
    d, a = list(partition.donor_sites), list(partition.acceptor_sites)
    ud, ua = decomposition.donor_unitary, decomposition.acceptor_unitary
    if ud.shape[0] != len(d) or ua.shape[0] != len(a):
        raise ValueError("decomposition does not match partition")
    hd = ud.T @ h.block(d, d) @ ud
    ha = ua.T @ h.block(a, a) @ ua
    coupling = ud.T @ h.block(d, a) @ ua
    return np.block([[hd, coupling], [coupling.T, ha]])


def site_weights(vector) -> np.ndarray:
    """Site occupation probabilities (squared amplitudes) of a state vector."""
    v = np.asarray(vector)
    return np.abs(v) ** 2
