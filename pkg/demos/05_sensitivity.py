"""Does amplification improve a noisy readout?

With a readout whose noise is Xi^2 times the projection noise, a plain
Ramsey measurement gives (dphi)^2 ~ Xi^2/N.  Amplifying first by
G ~ c0 sqrt(N) suppresses the detection term by G^2 at the cost of the
amplifier's added noise, so (dphi)^2 falls as 1/N^2 until it meets the
floor (1 + sigma2_add)/N.

Run with ``python demos/05_sensitivity.py``.
"""

import numpy as np

from spinamp.sensing import amplified_error

XI2 = 67.0 ** 2          # poor optical readout of a solid-state spin ensemble
C0, SIGMA2 = 0.415, 1.28  # measured by demos/01_superradiant_gain.py
Nc = XI2 / C0 ** 2
print(f"crossover N_c = Xi^2/c0^2 = {Nc:.0f}\n")
print(f"{'N':>9} {'plain N(dphi)^2':>16} {'amplified N(dphi)^2':>20}")
for N in np.geomspace(10, 100 * Nc, 9):
    plain = 1 + XI2
    amp = float(amplified_error(N, XI2, SIGMA2, C0 * np.sqrt(N))) * N
    print(f"{N:9.0f} {plain:16.0f} {amp:20.3f}")
