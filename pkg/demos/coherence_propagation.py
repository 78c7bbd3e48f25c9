"""Does transfer carry coherence across weakly coupled complexes?

Two copies of the FMO 1-2 dimer are joined by a 1 cm^-1 link from site 2 to
site 3. The acceptor state predicted from transfer events convolved with the
acceptor's own dynamics is compared with the exact hierarchy result, and the
transfer rate is compared with the population of the donor ICC state (site 2).
Takes a few minutes.
"""

import numpy as np

from coherent_ratchet.transfer import coherence_propagation_benchmark, normalized

bench = coherence_propagation_benchmark()
print(f"corr(rate, donor population) = {bench.report.correlation:.3f}, "
      f"fitted scale {bench.report.scale:.3e} fs^-1")
print(f"RMS error of the normalized acceptor state = {bench.rms_error:.4f}")
sim, pred = normalized(bench.simulated[1:]), normalized(bench.predicted[1:])
for t in (100, 250, 500, 1000):
    i = int(np.argmin(np.abs(bench.times[1:] - t)))
    print(f"t = {t:4d} fs: rho_34 simulated {sim[i, 0, 1]:.3f}, predicted {pred[i, 0, 1]:.3f}")
