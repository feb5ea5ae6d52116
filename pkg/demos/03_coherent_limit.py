"""Amplification without a lossy cavity.

With an undamped cavity mode the spins and photons exchange excitations
coherently (Tavis-Cummings dynamics).  The gain still scales as sqrt(N),
now on the faster time scale ln(sqrt(N))/(g sqrt(N)).  The exact sector
solver is checked against the second-order cumulant equations, which reach
much larger ensembles.

Run with ``python demos/03_coherent_limit.py``.
"""

import numpy as np

from spinamp.meanfield import integrate_coherent_cumulant
from spinamp.sensing import gain_curve
from spinamp.tavis_cummings import evolve_tc_unitary

PHI = 0.01
print(f"{'N':>6} {'G exact':>8} {'G cumulant':>11} {'G/sqrt(N)':>10}")
for N in (40, 100, 200, 1000, 10000):
    grid = np.linspace(0, 3 * np.log(np.sqrt(N)) / np.sqrt(N), 400)
    exact = ""
    if N <= 200:
        gc = gain_curve(evolve_tc_unitary(1.0, N, PHI, grid),
                        evolve_tc_unitary(1.0, N, -PHI, grid))
        exact = f"{gc.G_max:8.3f}"
    g_mf = integrate_coherent_cumulant(1.0, N, 1e-5, grid).peak()[1]
    print(f"{N:6d} {exact:>8} {g_mf:11.3f} {g_mf / np.sqrt(N):10.3f}")
