"""ICC states of the FMO complex.

The coupling block between two groups of pigments is split by a singular
value decomposition into independent donor/acceptor channels. For the 1-2
dimer feeding the rest of the complex there are two channels; the stronger
one leaves from site 2.
"""

import numpy as np

from coherent_ratchet.icc import icc_decompose, site_weights
from coherent_ratchet.model import ComplexPartition, fmo_hamiltonian

np.set_printoptions(precision=3, suppress=True)

h = fmo_hamiltonian()
icc = icc_decompose(h, ComplexPartition((0, 1), (2, 3, 4, 5, 6)))

for l, s in enumerate(icc.singular_values):
    d, a = icc.donor_state(l), icc.acceptor_state(l)
    print(f"channel {l + 1}: coupling {s:.1f} cm^-1")
    print(f"  donor    {d}  (site weights {site_weights(d)})")
    print(f"  acceptor {a}")

# site 8 couples through a single channel: the normalized coupling row
h8 = fmo_hamiltonian(include_site8=True, site8_energy=0.0)
star = icc_decompose(h8, ComplexPartition((7,), tuple(range(7))))
print(f"\nsite 8 -> 1..7: J* = {star.singular_values[0]:.2f} cm^-1, "
      f"{site_weights(star.acceptor_state(0))[0]:.0%} of the acceptor on site 1")
