"""How local dephasing, relaxation and thermal pumping erode the gain.

Amplification needs the collective rate N Gamma to beat the local rates:
the single-spin cooperativity C_k = N Gamma / gamma_k must exceed a number
of order one.  A thermal bath at occupation n_th also competes with the
collective decay and lowers the gain.

Run with ``python demos/02_dissipation_thresholds.py``.
"""

import numpy as np

from spinamp.dicke import coherent_spin_state
from spinamp.liouvillian import EnsembleParams, evolve_collective, evolve_permutation_invariant
from spinamp.sensing import gain_curve

N, PHI = 30, 0.01
grid = np.linspace(0, 3 * np.log(N) / N, 300)


def gain(p, engine):
    a = engine(p, coherent_spin_state(N, PHI, np.pi / 2), grid)
    b = engine(p, coherent_spin_state(N, -PHI, np.pi / 2), grid)
    return gain_curve(a, b).G_max


G0 = gain(EnsembleParams(N), evolve_collective)
print(f"N = {N}, no local dissipation: G_max = {G0:.3f}\n")
print(f"{'C':>6} {'G (dephasing)':>14} {'G (relaxation)':>15}")
for C in (1.0, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0):
    gp = gain(EnsembleParams(N, gamma_phi=N / C), evolve_permutation_invariant)
    gr = gain(EnsembleParams(N, gamma_rel=N / C), evolve_permutation_invariant)
    print(f"{C:6.0f} {gp:14.3f} {gr:15.3f}")

M = 120
tgrid = np.linspace(0, 3 * np.log(M) / M, 1200)
print(f"\nthermal bath at N = {M}")
ref = None
for n in (0.0, 1.0, 3.0, 10.0):
    p = EnsembleParams(M, n_th=n)
    a = evolve_collective(p, coherent_spin_state(M, PHI, np.pi / 2), tgrid)
    b = evolve_collective(p, coherent_spin_state(M, -PHI, np.pi / 2), tgrid)
    g = gain_curve(a, b).G_max
    ref = ref or g
    print(f"  n_th = {n:4.1f}: G_max = {g:.3f} ({g / ref:.2f} of the zero-temperature value)")
