import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from spinamp.dicke import DickeBlockState, coherent_spin_state, dicke_state
from spinamp.errors import CutoffError, ResourceError
from spinamp.liouvillian import (BLOCK_SOLVER_MAX_N, CavityParams, EnsembleParams,
                                 evolve_brute_force, evolve_cavity_qme,
                                 evolve_collective, evolve_permutation_invariant,
                                 trace_distance)
from spinamp.sensing import gain_curve
from spinamp.tavis_cummings import evolve_tc_unitary


def tipped(N, phi):
    return coherent_spin_state(N, phi, np.pi / 2)


def collective_gain(N, phi, grid, **kw):
    p = EnsembleParams(N, **kw)
    a = evolve_collective(p, tipped(N, phi), grid)
    b = evolve_collective(p, tipped(N, -phi), grid)
    return gain_curve(a, b, phi)


class TestParams:
    def test_cooperativities(self):
        p = EnsembleParams(30, Gamma=2.0, gamma_phi=3.0)
        assert p.C_phi == pytest.approx(20.0)
        assert p.C_rel == np.inf
        assert p.has_local

    @pytest.mark.parametrize("kw", [{"N": 0}, {"N": 2.5}, {"N": 3, "Gamma": -1},
                                    {"N": 3, "n_th": -0.1}, {"N": 3, "gamma_phi": -1}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            EnsembleParams(**kw)

    def test_cavity_params(self):
        cav = CavityParams(0.1, 2.0, Delta=1.0)
        assert cav.gamma_eff() == pytest.approx(4 * 0.01 / 2 * 4 / (4 + 4))
        with pytest.raises(ValueError):
            CavityParams(0.1, -1.0)
        with pytest.raises(ValueError):
            CavityParams(0.1, 1.0, fock_cutoff=0)
        with pytest.raises(ValueError):
            CavityParams(0.1, 0.0).gamma_eff()
        with pytest.raises(ValueError):
            CavityParams([0.1, 0.2], 1.0).couplings(3)


class TestCollective:
    def test_transient_amplification(self):
        N = 120
        grid = np.linspace(0, 3 * np.log(N) / N, 301)
        tr = evolve_collective(EnsembleParams(N), tipped(N, 1e-5), grid)
        i = int(np.argmax(tr.sy))
        assert tr.sy[i] > 2 * tr.sy[0]
        assert tr.sy[-1] < tr.sy[i]
        assert grid[i] == pytest.approx(np.log(N) / N, rel=0.25)

    def test_single_spin_never_amplifies(self):
        grid = np.linspace(0, 5, 200)
        tr = evolve_collective(EnsembleParams(1, Gamma=1.3), tipped(1, 0.3), grid)
        assert np.all(np.diff(tr.sy) <= 1e-15)

    def test_matches_dense_oracle(self):
        N, phi = 4, 1e-3
        grid = np.linspace(0, 2.0, 21)
        tr = evolve_collective(EnsembleParams(N), tipped(N, phi), grid, store_states=True)
        L = oracles.ensemble_liouvillian(N, Gamma=1.0)
        ref = oracles.evolve(L, oracles.product_state(N, phi, np.pi / 2), grid)
        assert max(trace_distance(s, r) for s, r in zip(tr.states, ref)) < 1e-8

    @pytest.mark.parametrize("n_th", [0.0, 0.7])
    def test_trace_and_casimir(self, n_th):
        N = 40
        grid = np.linspace(0, 0.5, 101)
        tr = evolve_collective(EnsembleParams(N, n_th=n_th), tipped(N, 0.2), grid)
        assert tr.max_trace_error() < 1e-9
        assert np.max(np.abs(tr.extras["casimir"] - N / 2 * (N / 2 + 1))) < 1e-8
        assert np.all(tr.var_sy >= 0)

    def test_relaxes_to_ground_state(self):
        N = 10
        grid = np.linspace(0, 20.0, 11)
        tr = evolve_collective(EnsembleParams(N), tipped(N, 0.5), grid)
        assert tr.sz[-1] == pytest.approx(-N / 2, abs=1e-6)

    def test_gain_phi_independent(self):
        N = 60
        grid = np.linspace(0, 3 * np.log(N) / N, 200)
        curves = [collective_gain(N, phi, grid).G for phi in (1e-6, 1e-5, 1e-4)]
        for G in curves[1:]:
            assert np.max(np.abs(G - curves[0]) / np.abs(curves[0])) < 1e-4

    @pytest.mark.parametrize("N", [3, 4, 8, 30])
    def test_gain_exceeds_one(self, N):
        grid = np.linspace(0, 3 * max(np.log(N), 1) / N, 200)
        assert collective_gain(N, 1e-3, grid).G_max > 1

    def test_two_spins_closed_form(self):
        # linear response in the triplet: G = 2 e^{-t} - e^{-2t} <= 1
        grid = np.linspace(0, 3, 200)
        gc = collective_gain(2, 1e-4, grid)
        np.testing.assert_allclose(gc.G, 2 * np.exp(-grid) - np.exp(-2 * grid), atol=1e-8)

    @pytest.mark.xfail(strict=True, reason="two spins never amplify: G = 2e^-t - e^-2t")
    def test_two_spins_gain_exceeds_one(self):
        grid = np.linspace(0, 3, 200)
        assert collective_gain(2, 1e-3, grid).G_max > 1

    def test_rejects_local_rates(self):
        with pytest.raises(ValueError, match="local"):
            evolve_collective(EnsembleParams(3, gamma_phi=0.1), tipped(3, 0.1), [0, 1])

    def test_rejects_other_sectors(self):
        with pytest.raises(ValueError, match="sector"):
            evolve_collective(EnsembleParams(2), dicke_state(2, 0, j=0), [0, 1])

    def test_rejects_bad_grid(self):
        with pytest.raises(ValueError, match="grid"):
            evolve_collective(EnsembleParams(2), tipped(2, 0.1), [0.1, 0.2])

    def test_dense_output(self):
        N = 20
        grid = np.linspace(0, 0.5, 51)
        tr = evolve_collective(EnsembleParams(N), tipped(N, 0.1), grid)
        fine = evolve_collective(EnsembleParams(N), tipped(N, 0.1), [0, 0.1234])
        assert tr.at(0.1234)["sy"][0] == pytest.approx(fine.sy[1], rel=1e-6)

    def test_csv_dump(self, tmp_path):
        tr = evolve_collective(EnsembleParams(3), tipped(3, 0.1), np.linspace(0, 1, 5))
        path = tmp_path / "traj.csv"
        tr.to_csv(path, extra_columns=["casimir"])
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["t", "Sx", "Sy", "Sz", "VarSx", "VarSy", "VarSz", "Cyz",
                           "trace", "casimir"]
        assert len(rows) == 6
        assert float(rows[2][0]) == 0.25


class TestPermutationInvariant:
    def test_independent_decay(self):
        N, g = 6, 0.4
        grid = np.linspace(0, 3, 31)
        tr = evolve_permutation_invariant(EnsembleParams(N, Gamma=0.0, gamma_rel=g),
                                          tipped(N, np.pi / 2), grid)
        np.testing.assert_allclose(tr.sy, N / 2 * np.exp(-g * grid / 2), rtol=1e-8)

    def test_full_space_example(self):
        N = 6
        p = EnsembleParams(N, Gamma=1.0, gamma_phi=0.5, gamma_rel=0.2)
        grid = np.linspace(0, 1.5, 7)
        tr = evolve_permutation_invariant(p, tipped(N, 0.3), grid, store_states=True)
        ref = evolve_brute_force(p, tipped(N, 0.3), grid, store_states=True)
        assert max(trace_distance(s, r) for s, r in zip(tr.states, ref.states)) < 1e-7

    def test_dense_oracle(self):
        N = 4
        p = EnsembleParams(N, Gamma=1.0, gamma_phi=0.5, gamma_rel=0.2)
        grid = np.linspace(0, 1.5, 7)
        tr = evolve_permutation_invariant(p, tipped(N, 0.3), grid, store_states=True)
        L = oracles.ensemble_liouvillian(N, 1.0, 0.2, 0.5)
        ref = oracles.evolve(L, oracles.product_state(N, 0.3, np.pi / 2), grid)
        assert max(trace_distance(s, r) for s, r in zip(tr.states, ref)) < 1e-7

    @settings(max_examples=12)
    @given(st.integers(1, 4), st.floats(0, 2), st.floats(0, 1), st.floats(0, 1),
           st.floats(0, 1), st.floats(0, np.pi), st.floats(0, 2 * np.pi))
    def test_oracle_property(self, N, G, gr, gp, nth, theta, az):
        p = EnsembleParams(N, Gamma=G, gamma_rel=gr, gamma_phi=gp, n_th=nth)
        grid = np.array([0.0, 0.4, 1.1])
        tr = evolve_permutation_invariant(p, coherent_spin_state(N, theta, az), grid,
                                          store_states=True)
        ref = oracles.evolve(oracles.ensemble_liouvillian(N, G, gr, gp, nth),
                             oracles.product_state(N, theta, az), grid)
        for s, r in zip(tr.states, ref):
            assert trace_distance(s, r) < 1e-7
        assert tr.max_trace_error() < 1e-9

    def test_trace_with_local_terms(self):
        N = 30
        p = EnsembleParams(N, gamma_phi=2.0, gamma_rel=1.0)
        tr = evolve_permutation_invariant(p, tipped(N, 0.1), np.linspace(0, 0.5, 50))
        assert tr.max_trace_error() < 1e-9

    def test_twist_matches_brute_force(self):
        N = 4
        p = EnsembleParams(N, Gamma=0.3, gamma_phi=0.2)
        grid = np.linspace(0, 2, 9)
        s0 = coherent_spin_state(N, 1.2, 0.0)
        a = evolve_permutation_invariant(p, s0, grid, chi=0.7)
        b = evolve_brute_force(p, s0, grid, chi=0.7)
        np.testing.assert_allclose(a.sy, b.sy, atol=1e-8)
        np.testing.assert_allclose(a.var_sy, b.var_sy, atol=1e-8)

    def test_resource_limit(self):
        N = BLOCK_SOLVER_MAX_N + 2
        with pytest.raises(ResourceError):
            evolve_permutation_invariant(EnsembleParams(N, gamma_phi=1.0),
                                         tipped(N, 0.1), [0, 1])


class TestBruteForce:
    def test_two_spin_cascade(self):
        grid = np.linspace(0, 4, 41)
        tr = evolve_brute_force(EnsembleParams(2), oracles.product_state(2, 0, 0), grid,
                                rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(tr.sz, oracles.two_spin_sz(1.0, grid), atol=1e-9)

    def test_single_spin_decay(self):
        grid = np.linspace(0, 3, 31)
        tr = evolve_brute_force(EnsembleParams(1), oracles.product_state(1, 0, 0), grid)
        np.testing.assert_allclose(tr.sz + 0.5, np.exp(-grid), atol=1e-9)

    def test_dephasing_rate(self):
        # each single-spin coherence decays at gamma_phi, populations are frozen
        N, gp = 8, 0.3
        grid = np.linspace(0, 2, 5)
        p = EnsembleParams(N, Gamma=0.0, gamma_phi=gp)
        tr = evolve_brute_force(p, oracles.product_state(N, 1.0, 0.0), grid)
        np.testing.assert_allclose(tr.sx, N / 2 * np.sin(1.0) * np.exp(-gp * grid),
                                   rtol=1e-8)
        np.testing.assert_allclose(tr.sz, N / 2 * np.cos(1.0), rtol=1e-10)

    def test_matches_dense_oracle(self):
        N = 3
        p = EnsembleParams(N, Gamma=0.8, gamma_rel=0.3, gamma_phi=0.4, n_th=0.5)
        grid = np.linspace(0, 1.0, 5)
        rho0 = oracles.product_state(N, 0.8, 0.2)
        tr = evolve_brute_force(p, rho0, grid, chi=0.5, store_states=True)
        ref = oracles.evolve(oracles.ensemble_liouvillian(N, 0.8, 0.3, 0.4, 0.5, chi=0.5),
                             rho0, grid)
        assert max(trace_distance(a, b) for a, b in zip(tr.states, ref)) < 1e-8

    def test_resource_limit(self):
        with pytest.raises(ResourceError):
            evolve_brute_force(EnsembleParams(13), np.eye(1), [0, 1])

    def test_shape_check(self):
        with pytest.raises(ValueError):
            evolve_brute_force(EnsembleParams(2), np.eye(3), [0, 1])


class TestCavity:
    def test_decoupled(self):
        N = 3
        cav = CavityParams(0.0, 1.0)
        tr = evolve_cavity_qme(cav, EnsembleParams(N, Gamma=0.0), tipped(N, 0.4),
                               np.linspace(0, 5, 11))
        np.testing.assert_allclose(tr.sy, tr.sy[0], atol=1e-12)
        np.testing.assert_allclose(tr.extras["photons"], 0.0, atol=1e-14)

    def test_undamped_matches_unitary(self):
        N, g, phi = 2, 0.7, 0.3
        grid = np.linspace(0, 4, 41)
        qme = evolve_cavity_qme(CavityParams(g, 0.0), EnsembleParams(N, Gamma=0.0),
                                tipped(N, phi), grid, rtol=1e-12, atol=1e-14)
        tc = evolve_tc_unitary(g, N, phi, grid)
        np.testing.assert_allclose(qme.sy, tc.sy, atol=1e-8)
        np.testing.assert_allclose(qme.sz, tc.sz, atol=1e-8)

    def test_bad_damping_regime(self):
        N = 4
        g, kappa = 0.05, 1.0
        Geff = 4 * g * g / kappa
        grid = np.linspace(0, 3 * np.log(N) / (Geff * N), 120)
        qme = evolve_cavity_qme(CavityParams(g, kappa), EnsembleParams(N, Gamma=0.0),
                                tipped(N, 0.05), grid)
        ad = evolve_collective(EnsembleParams(N, Gamma=Geff), tipped(N, 0.05), grid)
        assert np.max(np.abs(qme.sy - ad.sy)) / np.max(np.abs(ad.sy)) < 0.05
        assert qme.max_trace_error() < 1e-9

    def test_full_space_path_agrees(self):
        # list couplings force the 2^N spin representation
        N = 2
        grid = np.linspace(0, 3, 13)
        sym = evolve_cavity_qme(CavityParams(0.4, 0.5), EnsembleParams(N, Gamma=0.0),
                                tipped(N, 0.3), grid)
        full = evolve_cavity_qme(CavityParams([0.4, 0.4], 0.5), EnsembleParams(N, Gamma=0.0),
                                 tipped(N, 0.3), grid)
        np.testing.assert_allclose(sym.sy, full.sy, atol=1e-8)

    def test_cutoff_saturation(self):
        N = 4
        with pytest.raises(CutoffError):
            evolve_cavity_qme(CavityParams(1.0, 0.0, fock_cutoff=2),
                              EnsembleParams(N, Gamma=0.0), tipped(N, 0.3),
                              np.linspace(0, 3, 10))

    def test_spin_state_shape(self):
        with pytest.raises(ValueError):
            evolve_cavity_qme(CavityParams(0.1, 1.0), EnsembleParams(2, Gamma=0.0),
                              np.ones(5) / np.sqrt(5), [0, 1])


def test_trace_distance_block_vs_full():
    a = coherent_spin_state(3, 0.3)
    b = DickeBlockState(3, {1.5: np.eye(4) / 8, 0.5: np.eye(2) / 8})
    assert trace_distance(a, b) == pytest.approx(trace_distance(a.to_full(), b.to_full()))
