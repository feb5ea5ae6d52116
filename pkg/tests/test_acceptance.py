"""End-to-end acceptance checks, one group per criterion.

Every check records its outcome through :func:`check`; the terminal summary
(see ``conftest.py``) prints one PASS/FAIL line per criterion.  A criterion
passes only if all of its parts pass, so parts kept as strict ``xfail``
show up as FAIL there.

Run alone with ``pytest tests/test_acceptance.py``.
"""

import math
from collections import OrderedDict

import numpy as np
import pytest

from spinamp.dicke import coherent_spin_state
from spinamp.fitting import fit_scaling
from spinamp.liouvillian import (CavityParams, EnsembleParams, evolve_brute_force,
                                 evolve_cavity_qme, evolve_collective,
                                 evolve_permutation_invariant, trace_distance)
from spinamp.meanfield import (coherent_constraints, integrate_coherent_cumulant,
                               integrate_dissipative_cumulant)
from spinamp.oat import (OATParams, _peak_grid, oat_gsub, oat_qme, optimize_detuning)
from spinamp.sensing import (ReadoutModel, added_noise, amplified_error, estimation_error,
                             gain_curve, heuristic_added_noise_bound)
from spinamp.tavis_cummings import (DecouplingConfig, adiabatic_gamma, evolve_tc_unitary,
                                    simulate_decoupling_sequence)

TITLES = OrderedDict([
    (1, "gain scaling G_max ~ c0 sqrt(N)"),
    (2, "delay time a ln(N)/N"),
    (3, "added noise at t_max"),
    (4, "cooperativity threshold and large-C behavior"),
    (5, "finite temperature 3 dB"),
    (6, "coherent limit scaling"),
    (7, "adiabatic elimination"),
    (8, "block solver vs brute force"),
    (9, "conservation suite"),
    (10, "one-axis-twist baseline"),
    (11, "sensitivity crossover"),
    (12, "decoupling verifier"),
])

RESULTS = {k: [] for k in TITLES}


def check(crit, label, ok, detail=""):
    RESULTS[crit].append((label, bool(ok), detail))
    return bool(ok)


def summary_lines():
    out = []
    for k, title in TITLES.items():
        parts = RESULTS[k]
        if not parts:
            out.append(f"criterion {k:2d} NOT RUN  {title}")
            continue
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        info = "; ".join(f"{lab}: {'ok' if ok else 'FAILED'} {det}".rstrip()
                         for lab, ok, det in parts)
        out.append(f"criterion {k:2d} {status}  {title} | {info}")
    return out


PHI = 0.01
GAIN_NS = (20, 40, 60, 80, 100, 120, 160)


def window(N, n_th=0.0, points=300, span=3.0):
    return np.linspace(0, span * np.log(N) / (N * (1 + 2 * n_th)), points)


def pm(run, N, phi=PHI):
    a = run(coherent_spin_state(N, phi, np.pi / 2))
    b = run(coherent_spin_state(N, -phi, np.pi / 2))
    return a, b, gain_curve(a, b)


@pytest.fixture(scope="module")
def collective_runs():
    out = {}
    for N in GAIN_NS:
        p = EnsembleParams(N)
        a, b, gc = pm(lambda s: evolve_collective(p, s, window(N)), N)
        out[N] = (a, gc)
    return out


# 1 -------------------------------------------------------------------------

def test_c1_gain_scaling(collective_runs):
    Ns = np.array(GAIN_NS)
    G = np.array([collective_runs[n][1].G_max for n in GAIN_NS])
    fit = fit_scaling(Ns, G, "sqrtN")
    p, c0 = fit.coefficients["p"], fit.c0_sqrt
    hi = fit_scaling(Ns[Ns >= 40], G[Ns >= 40], "sqrtN")
    ok_p = check(1, "exponent", abs(p - 0.5) <= 0.05,
                 f"{p:.3f} (N>=40: {hi.coefficients['p']:.3f})")
    ok_c = check(1, "c0", 0.38 <= c0 <= 0.46,
                 f"{c0:.3f} sqrt(N) prefactor; free power-law prefactor "
                 f"{fit.coefficients['c0']:.3f}")
    assert ok_p and ok_c


# 2 -------------------------------------------------------------------------

def test_c2_delay_time(collective_runs):
    Ns = np.array([n for n in GAIN_NS if n >= 60])
    t = np.array([collective_runs[n][1].t_max for n in Ns])
    fit = fit_scaling(Ns, t, "logN-over-N")
    ok = check(2, "residual", fit.max_residual < 0.10,
               f"a = {fit.coefficients['a']:.3f}, max residual {fit.max_residual:.2%}")
    assert ok


# 3 -------------------------------------------------------------------------

def test_c3_added_noise(collective_runs):
    good = True
    for N in (n for n in GAIN_NS if n >= 100):
        a, gc = collective_runs[N]
        s2 = added_noise(a, gc, N)
        h = heuristic_added_noise_bound(gc.G_max, N)
        good &= check(3, f"N={N}", 1.2 <= s2 <= 1.4 and s2 > h,
                      f"sigma2_add {s2:.3f} > heuristic {h:.4f}")
    assert good


# 4 -------------------------------------------------------------------------

def local_gain(N, kind, C):
    p = EnsembleParams(N, **{kind: N / C})
    return pm(lambda s: evolve_permutation_invariant(p, s, window(N)), N)[2].G_max


def ideal_gain(N):
    p = EnsembleParams(N)
    return pm(lambda s: evolve_collective(p, s, window(N)), N)[2].G_max


def crossing(N, kind, lo, hi, tol=0.01):
    """Smallest C with G_max > 1, by bisection on [lo, hi]."""
    assert local_gain(N, kind, lo) <= 1 + 1e-9 < local_gain(N, kind, hi)
    while hi / lo - 1 > tol:
        mid = math.sqrt(lo * hi)
        if local_gain(N, kind, mid) > 1 + 1e-9:
            hi = mid
        else:
            lo = mid
    return math.sqrt(lo * hi)


def large_c_coefficient(N, kind, Cs=(20.0, 50.0, 100.0, 200.0)):
    G0 = ideal_gain(N)
    Cs = np.array(Cs)
    y = np.array([1 - local_gain(N, kind, C) / G0 for C in Cs])
    # least squares for y = a / C
    return float(np.sum(y / Cs) / np.sum(1 / Cs ** 2))


@pytest.mark.parametrize("kind,nominal", [("gamma_phi", 2.0), ("gamma_rel", 1.0)])
def test_c4_threshold(kind, nominal):
    N = 30
    c = crossing(N, kind, 0.25 * nominal, 4 * nominal)
    ok = check(4, f"crossing {kind}", nominal / 2 <= c <= 2 * nominal,
               f"C* = {c:.2f} at N={N} (nominal {nominal:g})")
    assert ok


def test_c4_dephasing_coefficient():
    a = large_c_coefficient(30, "gamma_phi")
    assert check(4, "a_phi N=30", abs(a - 3) <= 1, f"{a:.2f}")


@pytest.mark.xfail(strict=True, reason="a_rel grows with N; 3.9 at N = 30")
def test_c4_relaxation_coefficient_n30():
    a = large_c_coefficient(30, "gamma_rel")
    assert check(4, "a_rel N=30", abs(a - 6) <= 2, f"{a:.2f}")


def test_c4_coefficients_n100():
    N = 100
    a_phi = large_c_coefficient(N, "gamma_phi")
    a_rel = large_c_coefficient(N, "gamma_rel")
    ok1 = check(4, "a_phi N=100", abs(a_phi - 3) <= 1, f"{a_phi:.2f}")
    ok2 = check(4, "a_rel N=100", abs(a_rel - 6) <= 2, f"{a_rel:.2f}")
    assert ok1 and ok2


# 5 -------------------------------------------------------------------------

def test_c5_finite_temperature():
    N = 120
    nth = [0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0]
    G = []
    for n in nth:
        p = EnsembleParams(N, n_th=n)
        grid = window(N, points=1200)
        gc = pm(lambda s: evolve_collective(p, s, grid), N)[2]
        assert gc.t_max < 0.9 * grid[-1]
        G.append(gc.G_max)
    G = np.array(G)
    r = G[nth.index(3.0)] / G[0]
    ok1 = check(5, "ratio n_th=3", abs(r - 0.5) <= 0.05, f"{r:.3f}")
    ok2 = check(5, "monotone", np.all(np.diff(G) < 0),
                "G_max " + ", ".join(f"{g:.2f}" for g in G))
    assert ok1 and ok2


# 6 -------------------------------------------------------------------------

def tc_window(N, points=400, span=3.0):
    return np.linspace(0, span * np.log(np.sqrt(N)) / np.sqrt(N), points)


def test_c6_coherent_exact():
    Ns = np.array([40, 60, 80, 100, 120, 160, 200])
    G, t = [], []
    for N in Ns:
        grid = tc_window(N)
        gc = gain_curve(evolve_tc_unitary(1.0, N, PHI, grid),
                        evolve_tc_unitary(1.0, N, -PHI, grid))
        G.append(gc.G_max)
        t.append(gc.t_max)
    p = fit_scaling(Ns, G, "sqrtN").coefficients["p"]
    ft = fit_scaling(Ns, t, "logsqrtN-over-sqrtN")
    ok1 = check(6, "TC exponent", abs(p - 0.5) <= 0.05, f"{p:.3f}")
    ok2 = check(6, "TC t_max", ft.max_residual < 0.10,
                f"b = {ft.coefficients['b' if 'b' in ft.coefficients else 'a']:.3f}, "
                f"max residual {ft.max_residual:.2%}")
    assert ok1 and ok2


def test_c6_coherent_cumulant():
    Ns = np.unique(np.round(np.geomspace(100, 1e4, 7)).astype(int))
    G = [integrate_coherent_cumulant(1.0, int(N), 1e-5, tc_window(N)).peak()[1]
         for N in Ns]
    p = fit_scaling(Ns, G, "sqrtN").coefficients["p"]
    assert check(6, "cumulant exponent to 1e4", abs(p - 0.5) <= 0.05, f"{p:.3f}")


# 7 -------------------------------------------------------------------------

def adiabatic_deviation(g, kappa=1.0, N=4):
    """Max deviations of S_y and S_z over [0, 2 t_max], each relative to max |.|."""
    Gamma = adiabatic_gamma(g, kappa)
    ref = EnsembleParams(N, Gamma=Gamma)
    grid0 = np.linspace(0, 3 * np.log(N) / (Gamma * N), 300)
    _, _, gc = pm(lambda s: evolve_collective(ref, s, grid0), N, 0.05)
    grid = np.linspace(0, 2 * gc.t_max, 200)
    s0 = coherent_spin_state(N, 0.05, np.pi / 2)
    cav = evolve_cavity_qme(CavityParams(g, kappa), EnsembleParams(N, Gamma=0.0), s0, grid)
    col = evolve_collective(ref, s0, grid)
    return (np.max(np.abs(cav.sy - col.sy)) / np.max(np.abs(col.sy)),
            np.max(np.abs(cav.sz - col.sz)) / np.max(np.abs(col.sz)))


@pytest.fixture(scope="module")
def adiabatic_005():
    return adiabatic_deviation(0.05)


def test_c7_adiabatic_transverse(adiabatic_005):
    dev = adiabatic_005[0]
    assert check(7, "S_y g=0.05", dev < 0.05, f"{dev:.2%}")


@pytest.mark.xfail(strict=True, reason="cavity build-up lag shifts S_z by ~5.3% at "
                                       "g = 0.05 kappa; the shift scales as g^2")
def test_c7_adiabatic_longitudinal(adiabatic_005):
    dev = adiabatic_005[1]
    assert check(7, "S_z g=0.05", dev < 0.05, f"{dev:.2%}")


def test_c7_adiabatic_convergence(adiabatic_005):
    sy, sz = adiabatic_deviation(0.025)
    ok = check(7, "g=0.025", max(sy, sz) < 0.05 and sz < adiabatic_005[1] / 3,
               f"S_y {sy:.2%}, S_z {sz:.2%}")
    assert ok


# 8 -------------------------------------------------------------------------

@pytest.mark.slow
def test_c8_oracle_equivalence():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        N = int(rng.integers(2, 11))
        p = EnsembleParams(N, Gamma=rng.uniform(0.2, 2), gamma_rel=rng.uniform(0, 1),
                           gamma_phi=rng.uniform(0, 1), n_th=rng.uniform(0, 1))
        s0 = coherent_spin_state(N, rng.uniform(0, np.pi), rng.uniform(-np.pi, np.pi))
        grid = np.linspace(0, rng.uniform(0.2, 1.0), 6)
        a = evolve_permutation_invariant(p, s0, grid, store_states=True)
        b = evolve_brute_force(p, s0, grid, store_states=True)
        worst = max(worst, max(trace_distance(x, y) for x, y in zip(a.states, b.states)))
    assert check(8, "20 draws, N<=10", worst < 1e-7, f"worst trace distance {worst:.1e}")


# 9 -------------------------------------------------------------------------

def test_c9_lindblad_trace_and_casimir():
    worst_tr, worst_cas = 0.0, 0.0
    for N, n_th in ((50, 0.0), (120, 2.0)):
        tr = evolve_collective(EnsembleParams(N, n_th=n_th),
                               coherent_spin_state(N, 0.3, 0.2), window(N, n_th))
        worst_tr = max(worst_tr, tr.max_trace_error())
        cas = tr.extras["casimir"]
        worst_cas = max(worst_cas, np.max(np.abs(cas - cas[0])))
    for p in (EnsembleParams(20, gamma_rel=0.5, gamma_phi=0.5, n_th=0.3),
              EnsembleParams(8, gamma_phi=2.0)):
        s0 = coherent_spin_state(p.N, 1.0, 0.4)
        worst_tr = max(worst_tr, evolve_permutation_invariant(p, s0, window(p.N))
                       .max_trace_error())
    bf = evolve_brute_force(EnsembleParams(6, gamma_rel=0.3), coherent_spin_state(6, 1, 0),
                            window(6))
    worst_tr = max(worst_tr, bf.max_trace_error())
    cq = evolve_cavity_qme(CavityParams(0.3, 1.0), EnsembleParams(3, Gamma=0.0),
                           coherent_spin_state(3, 0.5, 0), np.linspace(0, 5, 20))
    worst_tr = max(worst_tr, cq.max_trace_error())
    ok1 = check(9, "trace", worst_tr < 1e-9, f"{worst_tr:.1e}")
    ok2 = check(9, "Casimir", worst_cas < 1e-8, f"{worst_cas:.1e}")
    assert ok1 and ok2


def test_c9_meanfield_constraints():
    worst = 0.0
    for N in (100, 10 ** 4):
        tr = integrate_dissipative_cumulant(EnsembleParams(N), 1e-5, window(N))
        cas = 2 * tr["Cxx"] + tr["Sz"] ** 2 + tr["Czz"]
        worst = max(worst, np.max(np.abs(cas / (N / 2 * (N / 2 + 1)) - 1)))
        co = integrate_coherent_cumulant(1.0, N, 1e-5, tc_window(N))
        spin, exc = coherent_constraints(co)
        worst = max(worst, np.max(np.abs(spin / spin[0] - 1)),
                    np.max(np.abs(exc / exc[0] - 1)))
    assert check(9, "MFT constraints", worst < 1e-6, f"{worst:.1e}")


def test_c9_tc_norm_and_excitation():
    worst = 0.0
    for N in (10, 120, 200):
        tr = evolve_tc_unitary(1.0, N, 0.2, tc_window(N))
        exc = tr.extras["excitation"]
        worst = max(worst, np.max(np.abs(tr.extras["norm"] - 1)),
                    np.max(np.abs(exc - exc[0])))
    assert check(9, "TC norm/excitation", worst < 1e-10, f"{worst:.1e}")


# 10 ------------------------------------------------------------------------

def test_c10a_background_slope():
    worst = 0.0
    for N in (4, 8, 12):
        G = 0.05
        tr = oat_qme(OATParams(N, 1.0, Gamma_coll=G), 0.0, np.linspace(0, 1e-4 / N, 5))
        slope = np.polyfit(tr.times, tr.sz, 1)[0]
        worst = max(worst, abs(slope / (-N * (N + 1) * G / 4) - 1))
    assert check(10, "(a) slope", worst < 0.01, f"{worst:.1e}")


def test_c10b_dephasing_factor():
    worst = 0.0
    t = np.linspace(0, 1.5, 25)
    for N in (4, 7, 10):
        g0 = oat_gsub(OATParams(N, 1.0), t, engine="exact").G
        g1 = oat_gsub(OATParams(N, 1.0, gamma_phi=0.7), t, engine="exact").G
        worst = max(worst, np.max(np.abs(g1 - np.exp(-0.7 * t) * g0)))
    assert check(10, "(b) e^{-gamma_phi t}", worst < 1e-8, f"{worst:.1e}")


def closure_error(N, x, **eta):
    p = OATParams.from_cavity(N, 1.0, 1.0, x, **eta) if eta else OATParams(N, 1.0)
    t = _peak_grid(p)
    return oat_gsub(p, t).G_max / oat_gsub(p, t, engine="exact").G_max - 1


def test_c10c_closure_dissipative_n12():
    worst = max(abs(closure_error(12, x, **{"eta_" + k: e}))
                for x in (1.0, 3.0, 10.0) for k in ("phi", "rel") for e in (10.0, 100.0, 1e3))
    assert check(10, "(c) N=12 cavity grid", worst < 0.10, f"worst {worst:.1%}")


@pytest.mark.xfail(strict=True, reason="Gaussian closure misses the dissipation-free "
                                       "peak by 12% at N = 12")
def test_c10c_closure_dissipation_free_n12():
    e = closure_error(12, None)
    assert check(10, "(c) N=12 no dissipation", abs(e) < 0.10, f"{e:.1%}")


@pytest.mark.xfail(strict=True, reason="closure overshoots the first exact peak at N = 6")
def test_c10c_closure_n6():
    e = closure_error(6, 3.0, eta_phi=300.0)
    assert check(10, "(c) N=6 x=3 eta=300", abs(e) < 0.10, f"{e:.1%}")


@pytest.fixture(scope="module")
def oat_ideal_1e4():
    p = OATParams(10 ** 4, 1.0)
    return oat_gsub(p, _peak_grid(p, points=600)).G_max


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="crossing of 0.5 sits at eta_phi ~ 0.7 sqrt(N)")
def test_c10d_dephasing_at_sqrt_n(oat_ideal_1e4):
    N = 10 ** 4
    _, G, _, _ = optimize_detuning(OATParams(N, 1.0), math.sqrt(N), kind="phi")
    r = G / oat_ideal_1e4
    assert check(10, "(d) eta=sqrt(N)", r < 0.5, f"ratio {r:.3f}")


@pytest.mark.slow
def test_c10d_dephasing_at_100_sqrt_n(oat_ideal_1e4):
    N = 10 ** 4
    _, G, _, _ = optimize_detuning(OATParams(N, 1.0), 100 * math.sqrt(N), kind="phi")
    r = G / oat_ideal_1e4
    assert check(10, "(d) eta=100 sqrt(N)", r > 0.9, f"ratio {r:.3f}")


# 11 ------------------------------------------------------------------------

def test_c11_sensitivity(collective_runs):
    xi2 = 67.0 ** 2
    Ns = np.array(GAIN_NS)
    c0 = fit_scaling(Ns, [collective_runs[n][1].G_max for n in GAIN_NS]).c0_sqrt
    a, gc = collective_runs[160]
    s2 = added_noise(a, gc, 160)
    Nc = xi2 / c0 ** 2
    # detection-dominated regime: slope -2 in log-log
    small = np.geomspace(10, Nc / 100, 6)
    d_small = amplified_error(small, xi2, s2, c0 * np.sqrt(small))
    slope = np.polyfit(np.log(small), np.log(d_small), 1)[0]
    ok1 = check(11, "1/N^2 regime", abs(slope + 2) < 0.05, f"slope {slope:.3f}")
    # far above the crossover, with the cumulant gain at that N
    N = int(round(10 * Nc))
    g_mf = integrate_dissipative_cumulant(EnsembleParams(N), 1e-5, window(N)).peak()[1]
    ratio = float(amplified_error(N, xi2, s2, g_mf)) * N
    ok2 = check(11, "10 N_c", abs(ratio / 2.3 - 1) < 0.15,
                f"N (dphi)^2 = {ratio:.3f} at N = {N} (c0 {c0:.3f}, sigma2 {s2:.3f})")
    # exact engine at N <= 160: amplified detection term = unamplified / G^2
    rm = ReadoutModel.from_xi(67.0)
    worst = 0.0
    for n in GAIN_NS:
        tr, g = collective_runs[n]
        var = float(tr.probe(np.atleast_1d(g.t_max))["sy2"][0]
                    - tr.probe(np.atleast_1d(g.t_max))["sy"][0] ** 2)
        amp = estimation_error({"sz": 0.0, "var_sz": var}, rm, g.G_max * n / 2, n)
        plain = estimation_error({"sz": 0.0, "var_sz": n / 4}, rm, n / 2, n)
        worst = max(worst, abs(amp.dphi2_det * g.G_max ** 2 / plain.dphi2_det - 1))
    ok3 = check(11, "exact detection identity", worst < 1e-12, f"{worst:.1e}")
    assert ok1 and ok2 and ok3


# 12 ------------------------------------------------------------------------

def test_c12_decoupling():
    d0 = simulate_decoupling_sequence(DecouplingConfig(0.3, [0.0, 0.0], [1.0, 1.0]))
    ok1 = check(12, "zero disorder", d0 < 1e-9, f"{d0:.1e}")
    Ts = (0.2, 0.1, 0.05, 0.025)
    d = [simulate_decoupling_sequence(DecouplingConfig.random(2, 1.0, T, seed=5))
         for T in Ts]
    ratios = [d[i] / d[i + 1] for i in range(len(d) - 1)]
    ok2 = check(12, "halving T", all(r >= 2 for r in ratios),
                "ratios " + ", ".join(f"{r:.2f}" for r in ratios))
    assert ok1 and ok2
