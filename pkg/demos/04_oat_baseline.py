"""Comparison with a one-axis-twisting amplifier.

A dispersive cavity generates the twisting interaction chi S_z^2, which
also amplifies a small rotation, with ideal gain of order sqrt(N/e).  The
price is a residual collective decay Gamma_coll = chi kappa / Delta, which
makes S_y drift even without a signal, and local dissipation which is not
suppressed.  The detuning Delta trades one against the other; this script
finds the best trade-off for a few local-noise cooperativities eta.

Run with ``python demos/04_oat_baseline.py`` (about a minute).
"""

import math

from spinamp.oat import OATParams, _peak_grid, oat_gsub, oat_ideal_peak, optimize_detuning

N = 1000
t_id, g_id = oat_ideal_peak(N)
print(f"N = {N}: ideal twisting peak G = {g_id:.2f} at chi t = {t_id:.4f}"
      f" (sqrt(N/e) = {math.sqrt(N / math.e):.2f})")
ideal = OATParams(N, 1.0)
g_mf = oat_gsub(ideal, _peak_grid(ideal, points=600)).G_max
print(f"second-order cumulant estimate of the same peak: {g_mf:.2f}\n")

print(f"{'eta_phi':>8} {'Delta/kappa':>12} {'G_sub':>7} {'ratio':>6}")
for eta in (10.0, 100.0, 1000.0):
    D, G, tau1, _ = optimize_detuning(OATParams(N, 1.0), eta, kind="phi")
    print(f"{eta:8.0f} {D:12.1f} {G:7.2f} {G / g_mf:6.2f}")
