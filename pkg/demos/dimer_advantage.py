"""Coherent versus thermal population of a dimer.

After an excitation starts on site 1 and the beats average out, site 2 holds
``2 cos^2 sin^2`` of the population. The thermal population follows from the
Boltzmann factor of the exciton splitting. Where the coherent value exceeds
the thermal one, coherent delocalization pushes population uphill.
"""

import numpy as np

from coherent_ratchet.dimer import DimerPoint, advantage_scan, p_coherent, p_thermal
from coherent_ratchet.model import fmo_hamiltonian

theta = np.linspace(0.0, np.pi / 2, 7)
delta_e = np.linspace(0.0, 500.0, 6)
grid = advantage_scan(theta, delta_e, temperature=300.0, initial_site=1)
print("p_coherent - p_thermal (rows: dE in cm^-1, columns: theta in rad)")
print("        " + " ".join(f"{t:6.2f}" for t in theta))
for de, row in zip(delta_e, grid):
    print(f"{de:6.0f}  " + " ".join(f"{x:+6.2f}" for x in row))

m = fmo_hamiltonian().subsystem([0, 1]).matrix
pt = DimerPoint.from_sites(m[0, 0], m[1, 1], m[0, 1])
print(f"\nFMO 1-2 dimer: theta = {pt.theta:.3f} rad, dE = {pt.delta_e:.1f} cm^-1")
for init in (1, 2):
    print(f"  start on site {init}: p_coherent = {float(p_coherent(pt, init)):.3f}, "
          f"p_thermal = {float(p_thermal(pt)):.3f}")
