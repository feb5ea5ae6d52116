"""Undamped-cavity dynamics and the dynamical-decoupling check.

``H = g (a^dag S_- + a S_+)`` conserves the excitation number
``E = (m + N/2) + n``.  A spin state times the cavity vacuum splits into one
component per ``E``; each lives in a ``(E+1)``-dimensional sector with basis
``|m = E - N/2 - k>|n = k>`` where the Hamiltonian is a real tridiagonal
matrix.  Diagonalizing every sector once gives the evolution at any time in
closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .dicke import coherent_spin_state
from .errors import CutoffError
from .liouvillian import Trajectory, _finish_moments, _moments_to_trajectory, \
    full_space_operators

__all__ = [
    "evolve_tc_unitary",
    "DecouplingConfig",
    "simulate_decoupling_sequence",
    "adiabatic_gamma",
    "tc_sector_hamiltonian",
]


def tc_sector_hamiltonian(g, N, E) -> np.ndarray:
    """Tridiagonal ``H`` on excitation sector ``E`` (basis index = photon number)."""
    j = N / 2
    kmax = min(E, N)
    k = np.arange(kmax + 1)
    m = E - j - k
    # <m-1, k+1| a^dag S_- |m, k> = sqrt(k+1) sqrt(j(j+1) - m(m-1))
    off = g * np.sqrt(k[:-1] + 1) * np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] - 1))
    return np.diag(off, 1) + np.diag(off, -1)


class _Sectors:
    def __init__(self, g, N, amps):
        self.N = N
        self.amps = amps
        self.eig = []
        for E in range(N + 1):
            d = min(E, N) + 1
            if d == 1:
                self.eig.append((np.zeros(1), np.ones((1, 1))))
                continue
            H = tc_sector_hamiltonian(g, N, E)
            lam, V = sla.eigh_tridiagonal(np.zeros(d), np.diag(H, 1))
            self.eig.append((lam, V))

    def amplitudes(self, E, t):
        """``(len(t), E+1)`` sector amplitudes at times ``t``."""
        lam, V = self.eig[E]
        c = self.amps[E]
        ph = np.exp(-1j * np.outer(t, lam)) * V[0][None, :]
        return c * ph @ V.T

    def moments(self, t):
        N = self.N
        j = N / 2
        jj = j * (j + 1)
        T = t.size
        acc = {k: np.zeros(T) for k in ("trace", "sz", "sz2", "perp", "casimir",
                                         "photons", "excitation")}
        z = np.zeros(T, complex)
        u = np.zeros(T, complex)
        w = np.zeros(T, complex)
        prev = [None, None]
        for E in range(N + 1):
            A = self.amplitudes(E, t)
            k = np.arange(A.shape[1])
            m = E - j - k
            p = np.abs(A) ** 2
            acc["trace"] += p.sum(1)
            acc["sz"] += p @ m
            acc["sz2"] += p @ m ** 2
            acc["perp"] += p @ (jj - m ** 2)
            acc["casimir"] += p.sum(1) * jj
            acc["photons"] += p @ k
            acc["excitation"] += p.sum(1) * E
            a1 = np.sqrt(np.clip(jj - m * (m - 1), 0, None))
            if prev[0] is not None:
                B = prev[0]
                n = min(B.shape[1], A.shape[1])
                # S_- maps (E, k) to (E-1, k)
                z += np.einsum("tk,tk->t", B[:, :n].conj(), a1[:n] * A[:, :n])
                u += np.einsum("tk,tk->t", B[:, :n].conj(),
                               (a1 * (2 * m - 1))[:n] * A[:, :n])
            if prev[1] is not None:
                C = prev[1]
                n = min(C.shape[1], A.shape[1])
                a2 = a1 * np.sqrt(np.clip(jj - (m - 1) * (m - 2), 0, None))
                w += np.einsum("tk,tk->t", C[:, :n].conj(), a2[:n] * A[:, :n])
            prev = [A, prev[0]]
        out = _finish_moments(z, u, w, acc)
        out["photons"] = acc["photons"]
        out["excitation"] = acc["excitation"]
        return out


def evolve_tc_unitary(g, N, phi, grid, *, azimuth=np.pi / 2) -> Trajectory:
    """Schrodinger evolution of a tipped CSS times the cavity vacuum.

    The spin state is the coherent state at polar angle ``phi``; the default
    ``azimuth`` tips it toward ``+y``.  Evolution is exact (sector
    eigendecomposition), so :meth:`Trajectory.at` evaluates the closed form.
    Extras: ``photons``, ``excitation`` and ``norm``.
    """
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    N = int(N)
    grid = np.asarray(grid, float)
    psi = coherent_spin_state(N, phi, azimuth, as_vector=True)
    # Dicke index i has m = N/2 - i, i.e. excitation E = N - i
    amps = psi[::-1]
    sec = _Sectors(g, N, amps)

    def probe(t):
        return sec.moments(np.asarray(t, float))

    mom = probe(grid)
    return _moments_to_trajectory(
        grid, mom, N, probe=probe,
        extras={"photons": mom["photons"], "excitation": mom["excitation"],
                "norm": mom["trace"], "casimir": mom["casimir"]})


def adiabatic_gamma(g, kappa, Delta=0.0) -> float:
    """Cavity-mediated collective decay rate ``(4 g^2/kappa) kappa^2/(kappa^2 + 4 Delta^2)``."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return 4 * g * g / kappa * kappa ** 2 / (kappa ** 2 + 4 * Delta ** 2)


@dataclass(frozen=True)
class DecouplingConfig:
    """Pulse-sequence parameters.

    ``detunings`` are the spin frequencies relative to their mean (the frame
    frequency); ``couplings`` one value per spin.  One period is free
    evolution for ``T/2``, a pi pulse about x, ``T/4``, a pi pulse about z,
    ``T/4``, a pi pulse about y.
    """

    T: float
    detunings: Sequence[float]
    couplings: Sequence[float]
    cycles: int = 1
    input_photons: int = 1
    fock_cutoff: Optional[int] = None

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        if len(self.detunings) != len(self.couplings):
            raise ValueError("need one detuning per coupling")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        object.__setattr__(self, "detunings", tuple(float(x) for x in self.detunings))
        object.__setattr__(self, "couplings", tuple(float(x) for x in self.couplings))

    @property
    def N(self) -> int:
        return len(self.couplings)

    @property
    def sigma_omega(self) -> float:
        return float(np.std(self.detunings))

    @classmethod
    def random(cls, N, sigma, T, g=1.0, seed=0, **kw) -> "DecouplingConfig":
        rng = np.random.default_rng(seed)
        d = rng.normal(size=N)
        d = d - d.mean()
        d = sigma * d / d.std() if N > 1 and d.std() > 0 else np.zeros(N)
        return cls(T, d, [g] * N, **kw)


def simulate_decoupling_sequence(cfg: DecouplingConfig, g=None, cutoff=None) -> float:
    """Distance between the stroboscopic propagator and ``exp(-i Hbar T)``.

    ``Hbar = sum_j (g_j/2)(sigma_+^j a + sigma_-^j a^dag)``.  Both unitaries
    are compared on inputs with at most ``cfg.input_photons`` photons: the
    result is the spectral norm of ``(U_seq - e^{i theta} U_avg) P`` with the
    global phase ``theta`` chosen from the overlap on that subspace.

    Raises
    ------
    CutoffError
        If an input state leaks more than ``1e-6`` population into the top
        Fock level.
    """
    N = cfg.N
    gs = np.asarray(g if g is not None else cfg.couplings, float)
    nf = cutoff or cfg.fock_cutoff or (cfg.input_photons + 6)
    ops = full_space_operators(N)
    ds = 2 ** N
    a = sp.diags(np.sqrt(np.arange(1, nf)), 1, shape=(nf, nf)).toarray()
    Is, If = np.eye(ds), np.eye(nf)
    A = np.kron(Is, a)
    lows = [np.kron(L.toarray(), If) for L in ops["sigma_minus"]]
    Hc = sum(gj * (L @ A.conj().T + L.conj().T @ A) for gj, L in zip(gs, lows))
    Hz = sum(0.5 * dj * (L.conj().T @ L - L @ L.conj().T)
             for dj, L in zip(cfg.detunings, lows))
    H = Hz + Hc
    sx = np.array([[0, 1], [1, 0]], complex)
    sy = np.array([[0, -1j], [1j, 0]], complex)
    sz = np.diag([1.0, -1.0]).astype(complex)

    def pulse(s):
        P = np.array([[1.0]])
        for _ in range(N):
            P = np.kron(P, -1j * s)
        return np.kron(P, If)

    T = cfg.T
    U2 = sla.expm(-1j * H * (T / 2))
    U4 = sla.expm(-1j * H * (T / 4))
    one = pulse(sy) @ U4 @ pulse(sz) @ U4 @ pulse(sx) @ U2
    Hbar = sum(0.5 * gj * (L.conj().T @ A + L @ A.conj().T) for gj, L in zip(gs, lows))
    U_seq = np.linalg.matrix_power(one, cfg.cycles)
    U_avg = sla.expm(-1j * Hbar * T * cfg.cycles)
    nphot = np.tile(np.arange(nf), ds)
    cols = np.nonzero(nphot <= cfg.input_photons)[0]
    top = np.nonzero(nphot == nf - 1)[0]
    for U in (U_seq, U_avg):
        leak = np.max(np.sum(np.abs(U[np.ix_(top, cols)]) ** 2, axis=0))
        if leak > 1e-6:
            raise CutoffError(f"top Fock level population {leak:.2e} exceeds 1e-6; "
                              f"raise cutoff above {nf}")
    Us, Ua = U_seq[:, cols], U_avg[:, cols]
    ov = np.vdot(Ua, Us)
    theta = np.angle(ov) if abs(ov) > 0 else 0.0
    return float(np.linalg.norm(Us - np.exp(1j * theta) * Ua, 2))
