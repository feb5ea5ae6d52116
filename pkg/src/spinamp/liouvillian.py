"""Master-equation dynamics of spin ensembles.

Three solvers share one :class:`Trajectory` result type:

* a permutation-invariant block solver working on :class:`DickeBlockState`
  (collective decay/pumping, local relaxation and dephasing, optional
  one-axis-twist Hamiltonian),
* a brute-force solver in the full ``2^N`` product space, used as an oracle,
* a joint spin + cavity solver for the Tavis-Cummings master equation with a
  damped mode.

Every generator used here conserves ``q = m - m'`` (the distance of a
density-matrix element from the diagonal), so the block solver evolves each
``q`` stripe as an independent linear ODE.  Observables up to second order
only need ``q in {0, 1, 2}``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import _ode
from .dicke import (DickeBlockState, _m_values, block_degeneracy,
                    j_values)
from .errors import CutoffError, IntegrationError, ResourceError

__all__ = [
    "EnsembleParams",
    "CavityParams",
    "Trajectory",
    "evolve_collective",
    "evolve_permutation_invariant",
    "evolve_brute_force",
    "evolve_cavity_qme",
    "trace_distance",
    "full_space_operators",
    "BLOCK_SOLVER_MAX_N",
    "BRUTE_FORCE_MAX_N",
]

BLOCK_SOLVER_MAX_N = 200
BRUTE_FORCE_MAX_N = 12
CAVITY_MAX_DIM = 1500

TRAJECTORY_COLUMNS = ("t", "Sx", "Sy", "Sz", "VarSx", "VarSy", "VarSz", "Cyz", "trace")


@dataclass(frozen=True)
class EnsembleParams:
    """Spin count and dissipation rates of the ensemble master equation.

    ``Gamma`` is the collective decay rate, ``gamma_rel``/``gamma_phi`` the
    single-spin relaxation/dephasing rates (dephasing enters as
    ``gamma_phi/2 * D[sigma_z]``) and ``n_th`` the thermal occupation of the
    bath responsible for collective decay.
    """

    N: int
    Gamma: float = 1.0
    gamma_rel: float = 0.0
    gamma_phi: float = 0.0
    n_th: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        for name in ("Gamma", "gamma_rel", "gamma_phi", "n_th"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def _coop(self, rate: float) -> float:
        return np.inf if rate == 0 else self.N * self.Gamma / rate

    @property
    def C_rel(self) -> float:
        return self._coop(self.gamma_rel)

    @property
    def C_phi(self) -> float:
        return self._coop(self.gamma_phi)

    @property
    def has_local(self) -> bool:
        return self.gamma_rel > 0 or self.gamma_phi > 0


@dataclass(frozen=True)
class CavityParams:
    """Cavity mode parameters: coupling(s), energy decay rate, detuning, cutoff.

    ``g`` may be a scalar (uniform coupling) or one value per spin.
    ``fock_cutoff`` is the number of Fock levels kept; ``None`` selects the
    default ``N + 3`` (total excitation ``<= N`` plus two guard levels).
    """

    g: object
    kappa: float
    Delta: float = 0.0
    fock_cutoff: Optional[int] = None

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if self.fock_cutoff is not None and self.fock_cutoff < 1:
            raise ValueError("fock_cutoff must be >= 1")

    @property
    def uniform(self) -> bool:
        return np.ndim(self.g) == 0

    def couplings(self, N: int) -> np.ndarray:
        g = np.broadcast_to(np.asarray(self.g, float), (N,)) if self.uniform \
            else np.asarray(self.g, float)
        if g.shape != (N,):
            raise ValueError(f"need {N} couplings, got {g.shape}")
        return g

    def gamma_eff(self) -> float:
        """Adiabatic collective decay rate ``4 g^2 kappa / (kappa^2 + 4 Delta^2)``."""
        if self.kappa == 0:
            raise ValueError("adiabatic rate undefined for kappa = 0")
        g2 = float(np.mean(np.asarray(self.g, float) ** 2))
        return 4 * g2 / self.kappa * self.kappa ** 2 / (self.kappa ** 2 + 4 * self.Delta ** 2)


@dataclass(frozen=True)
class Trajectory:
    """Sampled first and second moments of the collective spin.

    ``extras`` holds solver-specific series (e.g. the Casimir ``<S^2>`` or
    the photon number); ``states`` the sampled states when requested.
    """

    times: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    var_sx: np.ndarray
    var_sy: np.ndarray
    var_sz: np.ndarray
    c_yz: np.ndarray
    trace: np.ndarray
    N: int
    states: Optional[tuple] = None
    extras: dict = field(default_factory=dict)
    probe: Optional[Callable] = field(default=None, repr=False, compare=False)

    def at(self, t) -> dict:
        """Observables at arbitrary times from the solver's dense output."""
        if self.probe is None:
            raise ValueError("trajectory has no continuous interpolant")
        return self.probe(np.atleast_1d(np.asarray(t, float)))

    def max_trace_error(self) -> float:
        return float(np.max(np.abs(self.trace - 1)))

    def to_csv(self, path, extra_columns: Sequence[str] = ()) -> None:
        """Write the trajectory with 15 significant digits.

        The base columns are ``t,Sx,Sy,Sz,VarSx,VarSy,VarSz,Cyz,trace``;
        ``extra_columns`` names keys of :attr:`extras` appended after them.
        """
        cols = [self.times, self.sx, self.sy, self.sz, self.var_sx,
                self.var_sy, self.var_sz, self.c_yz, self.trace]
        cols += [self.extras[k] for k in extra_columns]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(TRAJECTORY_COLUMNS) + list(extra_columns))
            for row in zip(*cols):
                w.writerow([format(float(x), ".15g") for x in row])


def _moments_to_trajectory(times, mom, N, **kw) -> Trajectory:
    sx, sy, sz = mom["sx"], mom["sy"], mom["sz"]
    return Trajectory(
        times=np.asarray(times, float), sx=sx, sy=sy, sz=sz,
        var_sx=mom["sx2"] - sx ** 2, var_sy=mom["sy2"] - sy ** 2,
        var_sz=mom["sz2"] - sz ** 2, c_yz=mom["syz"] - sy * sz,
        trace=mom["trace"], N=N, **kw)


def _finish_moments(z, u, w, d0) -> dict:
    """Combine ladder-operator moments into Cartesian ones.

    ``z = <S_->``, ``u = <{S_-, S_z}>``, ``w = <S_-^2>`` and ``d0`` the
    diagonal moments (trace, S_z, S_z^2, S^2 - S_z^2, S^2).
    """
    perp = d0["perp"]
    out = dict(trace=d0["trace"], sz=d0["sz"], sz2=d0["sz2"], casimir=d0["casimir"])
    out["sx"] = z.real
    out["sy"] = -z.imag
    out["sx2"] = 0.5 * (w.real + perp)
    out["sy2"] = 0.5 * (-w.real + perp)
    out["syz"] = -0.5 * u.imag
    return out


# ---------------------------------------------------------------------------
# permutation-invariant block generator


def _cg_up_dn(J: float, M: np.ndarray, k: float):
    """Coefficients of ``|J, M; k> = u |k, M-1/2>|up> + v |k, M+1/2>|down>``."""
    a = np.sqrt(np.clip((k + M + 0.5) / (2 * k + 1), 0, None))
    b = np.sqrt(np.clip((k - M + 0.5) / (2 * k + 1), 0, None))
    valid = np.abs(M) <= J + 1e-9
    if J > k:
        u, v = a, b
    else:
        u, v = -b, a
    return np.where(valid, u, 0.0), np.where(valid, v, 0.0)


class _BlockGenerator:
    """Sparse generator of each ``q`` stripe of a block-diagonal state."""

    def __init__(self, N, Gamma=0.0, n_th=0.0, gamma_rel=0.0, gamma_phi=0.0,
                 chi=0.0, jset=None):
        if N > BLOCK_SOLVER_MAX_N:
            raise ResourceError(f"block solver limited to N <= {BLOCK_SOLVER_MAX_N}")
        self.N = N
        self.rates = (Gamma, n_th, gamma_rel, gamma_phi, chi)
        local = gamma_rel > 0 or gamma_phi > 0
        self.js = j_values(N) if (local or jset is None) else sorted(jset, reverse=True)
        self._cache = {}

    def layout(self, q):
        """List of ``(j, offset, count)`` for stripe ``q`` and the total size."""
        out, off = [], 0
        for j in self.js:
            n = int(round(2 * j)) + 1 - q
            if n > 0:
                out.append((j, off, n))
                off += n
        return out, off

    def matrix(self, q) -> sp.csr_matrix:
        if q not in self._cache:
            self._cache[q] = self._build(q)
        return self._cache[q]

    def _build(self, q):
        N = self.N
        Gamma, n_th, g_rel, g_phi, chi = self.rates
        lay, size = self.layout(q)
        where = {j: (off, n) for j, off, n in lay}
        rows, cols, vals = [], [], []

        def add(r, c, v):
            keep = v != 0
            rows.append(r[keep]); cols.append(c[keep]); vals.append(v[keep])

        for j, off, n in lay:
            i = np.arange(n)
            m = j - i
            mp = m - q
            jj = j * (j + 1)
            idx = off + i
            bm = jj - m * (m - 1)
            bmp = jj - mp * (mp - 1)
            cm = jj - m * (m + 1)
            cmp_ = jj - mp * (mp + 1)
            diag = (-0.5 * Gamma * (n_th + 1) * (bm + bmp)
                    - 0.5 * Gamma * n_th * (cm + cmp_)
                    - 1j * chi * (m ** 2 - mp ** 2)
                    - 0.5 * g_rel * (N + m + mp)
                    - 0.5 * g_phi * N)
            add(idx, idx, diag.astype(complex))
            # S_- rho S_+ feeds (m, m') from (m+1, m'+1): position i-1
            if Gamma * (n_th + 1) > 0 and n > 1:
                s = i[1:]
                a1 = np.sqrt(jj - (m[s] + 1) * m[s])
                a2 = np.sqrt(jj - (mp[s] + 1) * mp[s])
                add(off + s, off + s - 1, (Gamma * (n_th + 1) * a1 * a2).astype(complex))
            # S_+ rho S_- feeds (m, m') from (m-1, m'-1): position i+1
            if Gamma * n_th > 0 and n > 1:
                s = i[:-1]
                a1 = np.sqrt(jj - (m[s] - 1) * m[s])
                a2 = np.sqrt(jj - (mp[s] - 1) * mp[s])
                add(off + s, off + s + 1, (Gamma * n_th * a1 * a2).astype(complex))

        if g_rel > 0 or g_phi > 0:
            for jt, off_t, n_t in lay:
                m = jt - np.arange(n_t)
                mp = m - q
                dt = block_degeneracy(N, jt)
                for k in (jt - 0.5, jt + 0.5):
                    tk = int(round(2 * k))
                    if k < 0 or tk > N - 1 or (N - 1 - tk) % 2:
                        continue
                    dk = block_degeneracy(N - 1, k) if N > 1 else 1
                    for js in (k - 0.5, k + 0.5):
                        if js < 0 or js not in where:
                            continue
                        c = float(Fraction(N * dk, dt))
                        off_s, n_s = where[js]
                        if g_rel > 0:
                            # <jt, M-1; k| sigma_- |js, M; k> = u(js, M) v(jt, M-1)
                            src = np.round(js - (m + 1)).astype(int)
                            ok = (src >= 0) & (src < n_s) & (m + 1 <= js + 1e-9)
                            u1, _ = _cg_up_dn(js, m + 1, k)
                            _, v1 = _cg_up_dn(jt, m, k)
                            u2, _ = _cg_up_dn(js, mp + 1, k)
                            _, v2 = _cg_up_dn(jt, mp, k)
                            coef = g_rel * c * u1 * v1 * u2 * v2
                            ok &= (np.abs(mp + 1) <= js + 1e-9)
                            add(off_t + np.arange(n_t)[ok], off_s + src[ok],
                                coef[ok].astype(complex))
                        if g_phi > 0:
                            src = np.round(js - m).astype(int)
                            ok = (src >= 0) & (src < n_s) & (np.abs(m) <= js + 1e-9) \
                                & (np.abs(mp) <= js + 1e-9)
                            ua, va = _cg_up_dn(jt, m, k)
                            ub, vb = _cg_up_dn(js, m, k)
                            uc, vc = _cg_up_dn(jt, mp, k)
                            ud, vd = _cg_up_dn(js, mp, k)
                            z1 = ua * ub - va * vb
                            z2 = uc * ud - vc * vd
                            coef = 0.5 * g_phi * c * z1 * z2
                            add(off_t + np.arange(n_t)[ok], off_s + src[ok],
                                coef[ok].astype(complex))
        r = np.concatenate(rows) if rows else np.zeros(0, int)
        c = np.concatenate(cols) if cols else np.zeros(0, int)
        v = np.concatenate(vals) if vals else np.zeros(0, complex)
        return sp.csr_matrix((v, (r, c)), shape=(size, size))

    # -- state <-> stripe vectors

    def stripe(self, state: DickeBlockState, q) -> np.ndarray:
        lay, size = self.layout(q)
        y = np.zeros(size, complex)
        for j, off, n in lay:
            y[off:off + n] = np.diagonal(state.block(j), offset=q)
        return y

    def assemble(self, stripes: dict) -> DickeBlockState:
        blocks = {}
        for j in self.js:
            d = int(round(2 * j)) + 1
            blocks[j] = np.zeros((d, d), complex)
        for q, y in stripes.items():
            lay, _ = self.layout(q)
            for j, off, n in lay:
                i = np.arange(n)
                blocks[j][i, i + q] = y[off:off + n]
                if q:
                    blocks[j][i + q, i] = np.conj(y[off:off + n])
        return DickeBlockState(self.N, blocks)

    def functionals(self):
        """Linear functionals on stripes 0, 1, 2 giving the moments."""
        out = {}
        for q in (0, 1, 2):
            lay, size = self.layout(q)
            f = {}
            for j, off, n in lay:
                d = float(block_degeneracy(self.N, j))
                m = j - np.arange(n)
                jj = j * (j + 1)
                sl = slice(off, off + n)
                if q == 0:
                    for key, val in (("trace", np.ones(n)), ("sz", m), ("sz2", m ** 2),
                                     ("perp", jj - m ** 2), ("casimir", np.full(n, jj))):
                        f.setdefault(key, np.zeros(size))[sl] = d * val
                elif q == 1:
                    a = np.sqrt(jj - m * (m - 1))
                    f.setdefault("z", np.zeros(size))[sl] = d * a
                    f.setdefault("u", np.zeros(size))[sl] = d * a * (2 * m - 1)
                else:
                    a = np.sqrt(jj - m * (m - 1)) * np.sqrt(jj - (m - 1) * (m - 2))
                    f.setdefault("w", np.zeros(size))[sl] = d * a
            out[q] = f
        return out


def _evolve_blocks(gen: _BlockGenerator, state0: DickeBlockState, grid, rtol, atol,
                   store_states: bool):
    grid = np.asarray(grid, float)
    if grid.ndim != 1 or grid[0] != 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing and start at 0")
    qmax = int(round(2 * max(gen.js))) if store_states else 2
    qs = range(0, qmax + 1)
    samples, sols, sizes = {}, {}, {}
    for q in qs:
        y0 = gen.stripe(state0, q)
        sizes[q] = y0.size
        scale = np.max(np.abs(y0)) if y0.size else 0.0
        if scale == 0:
            samples[q] = np.zeros((grid.size, y0.size), complex)
            sols[q] = None
            continue
        # stripes are decoupled; tolerances are relative to each stripe's size
        ys, sol = _ode.integrate_linear(gen.matrix(q), y0, grid, rtol=rtol,
                                        atol=atol * scale, dense=q <= 2)
        samples[q] = ys
        sols[q] = sol
    fun = gen.functionals()

    def moments(ys_by_q):
        f0 = fun[0]
        d0 = {k: ys_by_q[0] @ v for k, v in f0.items()}
        d0 = {k: v.real for k, v in d0.items()}
        z = ys_by_q[1] @ fun[1]["z"] if 1 in ys_by_q and "z" in fun[1] else 0 * d0["trace"]
        u = ys_by_q[1] @ fun[1]["u"] if 1 in ys_by_q and "u" in fun[1] else 0 * d0["trace"]
        w = ys_by_q[2] @ fun[2]["w"] if 2 in ys_by_q and "w" in fun[2] else 0 * d0["trace"]
        return _finish_moments(np.asarray(z, complex), np.asarray(u, complex),
                               np.asarray(w, complex), d0)

    def probe(t):
        ys = {}
        for q in (0, 1, 2):
            if q not in sizes:
                continue
            if sols.get(q) is None:
                ys[q] = np.zeros((t.size, sizes[q]), complex)
            else:
                ys[q] = sols[q](t).T
        return moments(ys)

    mom = moments({q: samples[q] for q in (0, 1, 2) if q in samples})
    states = None
    if store_states:
        states = tuple(gen.assemble({q: samples[q][i] for q in qs})
                       for i in range(grid.size))
    traj = _moments_to_trajectory(grid, mom, gen.N, states=states,
                                  extras={"casimir": mom["casimir"]}, probe=probe)
    return traj


def evolve_collective(params: EnsembleParams, state0: DickeBlockState, grid, *,
                      rtol=_ode.DEFAULT_RTOL, atol=_ode.DEFAULT_ATOL,
                      store_states=False) -> Trajectory:
    """Collective decay at finite temperature in the symmetric sector.

    Solves ``drho/dt = Gamma (n_th + 1) D[S_-] rho + Gamma n_th D[S_+] rho``
    on the ``(N+1)``-dimensional ``j = N/2`` sector.

    Raises
    ------
    ValueError
        If local rates are nonzero or ``state0`` leaves the symmetric sector.
    """
    if params.has_local:
        raise ValueError("local rates present; use evolve_permutation_invariant")
    if state0.N != params.N:
        raise ValueError("state and parameters disagree on N")
    if any(j != params.N / 2 and np.any(a != 0) for j, a in state0.blocks.items()):
        raise ValueError("state0 must lie in the j = N/2 sector")
    gen = _BlockGenerator(params.N, params.Gamma, params.n_th, jset=[params.N / 2])
    return _evolve_blocks(gen, state0, grid, rtol, atol, store_states)


def evolve_permutation_invariant(params: EnsembleParams, state0: DickeBlockState,
                                 grid, *, chi=0.0, rtol=_ode.DEFAULT_RTOL,
                                 atol=_ode.DEFAULT_ATOL, store_states=False) -> Trajectory:
    """Collective plus single-spin dissipation on a block-diagonal state.

    The generator is ``Gamma (n_th+1) D[S_-] + Gamma n_th D[S_+] + gamma_rel
    sum_i D[sigma_-^i] + gamma_phi/2 sum_i D[sigma_z^i]`` plus an optional
    one-axis twist ``-i chi [S_z^2, .]``.  Single-spin terms couple total-spin
    sectors; their coefficients follow from decomposing the N-spin space as
    (N-1 spins) + one spin and averaging over permutations.

    Raises
    ------
    ResourceError
        If ``N`` exceeds :data:`BLOCK_SOLVER_MAX_N`.
    """
    if state0.N != params.N:
        raise ValueError("state and parameters disagree on N")
    gen = _BlockGenerator(params.N, params.Gamma, params.n_th, params.gamma_rel,
                          params.gamma_phi, chi=chi,
                          jset=[j for j, a in state0.blocks.items() if np.any(a != 0)])
    return _evolve_blocks(gen, state0, grid, rtol, atol, store_states)


# ---------------------------------------------------------------------------
# brute-force oracle in the 2^N product space


def full_space_operators(N: int) -> dict:
    """Sparse collective operators on ``(C^2)^N`` (bit value 0 = spin up)."""
    dim = 2 ** N
    idx = np.arange(dim)
    bits = (idx[:, None] >> (N - 1 - np.arange(N))[None, :]) & 1   # (dim, N)
    z = 1 - 2 * bits
    ops = {"z": z, "bits": bits}
    sm = sp.csr_matrix((dim, dim))
    lows = []
    for i in range(N):
        up = bits[:, i] == 0
        src = idx[up]
        dst = src | (1 << (N - 1 - i))
        L = sp.csr_matrix((np.ones(src.size), (dst, src)), shape=(dim, dim))
        lows.append(L)
        sm = sm + L
    ops["sigma_minus"] = lows
    ops["sm"] = sm.tocsr()
    ops["sp"] = ops["sm"].T.tocsr()
    ops["sz"] = sp.diags(0.5 * z.sum(axis=1).astype(float)).tocsr()
    ops["sx"] = (0.5 * (ops["sp"] + ops["sm"])).tocsr()
    ops["sy"] = (-0.5j * (ops["sp"] - ops["sm"])).tocsr()
    return ops


class _FullGenerator:
    def __init__(self, params: EnsembleParams, chi=0.0):
        N = params.N
        if N > BRUTE_FORCE_MAX_N:
            raise ResourceError(f"brute-force solver limited to N <= {BRUTE_FORCE_MAX_N}")
        self.N = N
        self.p = params
        self.chi = chi
        ops = full_space_operators(N)
        self.ops = ops
        dim = 2 ** N
        self.dim = dim
        m = 0.5 * ops["z"].sum(axis=1).astype(float)
        nup = (ops["bits"] == 0).sum(axis=1).astype(float)
        x = np.arange(dim)
        ham = np.zeros((dim, dim))
        for i in range(N):
            b = (x >> (N - 1 - i)) & 1
            ham += b[:, None] ^ b[None, :]
        elem = (-1j * chi * (m[:, None] ** 2 - m[None, :] ** 2)
                - 0.5 * params.gamma_rel * (nup[:, None] + nup[None, :])
                - params.gamma_phi * ham)
        self.elem = elem
        G = params.Gamma
        self.down = G * (params.n_th + 1)
        self.upr = G * params.n_th
        self.pm = (ops["sp"] @ ops["sm"]).tocsr()
        self.mp = (ops["sm"] @ ops["sp"]).tocsr()

    def rhs(self, t, y):
        N, dim = self.N, self.dim
        rho = y.reshape(dim, dim)
        out = self.elem * rho
        sm, spl = self.ops["sm"], self.ops["sp"]
        if self.down:
            a = sm @ rho
            out += self.down * (sm @ a.conj().T).conj().T
            out -= 0.5 * self.down * (self.pm @ rho + (self.pm @ rho.conj().T).conj().T)
        if self.upr:
            a = spl @ rho
            out += self.upr * (spl @ a.conj().T).conj().T
            out -= 0.5 * self.upr * (self.mp @ rho + (self.mp @ rho.conj().T).conj().T)
        if self.p.gamma_rel:
            for i in range(N):
                lo, hi = 2 ** i, 2 ** (N - 1 - i)
                r6 = rho.reshape(lo, 2, hi, lo, 2, hi)
                o6 = out.reshape(lo, 2, hi, lo, 2, hi)
                o6[:, 1, :, :, 1, :] += self.p.gamma_rel * r6[:, 0, :, :, 0, :]
        return out.ravel()

    def moments(self, rho: np.ndarray) -> dict:
        ops = self.ops

        def ev(o):
            return np.asarray(o.multiply(rho.T).sum()).item()

        sx, sy, sz = ev(ops["sx"]).real, ev(ops["sy"]).real, ev(ops["sz"]).real
        sqx = ops["sx"] @ ops["sx"]
        sqy = ops["sy"] @ ops["sy"]
        sqz = ops["sz"] @ ops["sz"]
        yz = 0.5 * (ops["sy"] @ ops["sz"] + ops["sz"] @ ops["sy"])
        return dict(trace=np.trace(rho).real, sx=sx, sy=sy, sz=sz, sx2=ev(sqx).real,
                    sy2=ev(sqy).real, sz2=ev(sqz).real, syz=ev(yz).real,
                    casimir=ev(sqx + sqy + sqz).real)


def evolve_brute_force(params: EnsembleParams, rho0: np.ndarray, grid, *, chi=0.0,
                       rtol=_ode.DEFAULT_RTOL, atol=_ode.DEFAULT_ATOL,
                       store_states=False) -> Trajectory:
    """Integrate the full master equation on the ``2^N x 2^N`` density matrix.

    Validation oracle for the block solver: same generator, no symmetry
    reduction.  ``rho0`` may be a full density matrix or a
    :class:`DickeBlockState` (embedded automatically).

    Raises
    ------
    ResourceError
        If ``N > 12``.
    """
    gen = _FullGenerator(params, chi)
    if isinstance(rho0, DickeBlockState):
        rho0 = rho0.to_full()
    rho0 = np.asarray(rho0, complex)
    if rho0.shape != (gen.dim, gen.dim):
        raise ValueError(f"rho0 must be {gen.dim}x{gen.dim}")
    grid = np.asarray(grid, float)
    ys, _ = _ode.integrate(gen.rhs, rho0.ravel(), grid, rtol=rtol, atol=atol)
    rhos = [y.reshape(gen.dim, gen.dim) for y in ys]
    mom = [gen.moments(r) for r in rhos]
    mom = {k: np.array([mm[k] for mm in mom]) for k in mom[0]}
    return _moments_to_trajectory(grid, mom, params.N,
                                  states=tuple(rhos) if store_states else None,
                                  extras={"casimir": mom["casimir"]})


def trace_distance(a, b) -> float:
    """``||a - b||_1 / 2`` for Hermitian matrices or block states."""
    if isinstance(a, DickeBlockState) and isinstance(b, DickeBlockState):
        tot = 0.0
        for j in set(a.blocks) | set(b.blocks):
            ev = np.linalg.eigvalsh(a.block(j) - b.block(j))
            tot += block_degeneracy(a.N, j) * np.abs(ev).sum()
        return 0.5 * tot
    if isinstance(a, DickeBlockState):
        a = a.to_full()
    if isinstance(b, DickeBlockState):
        b = b.to_full()
    d = np.asarray(a) - np.asarray(b)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))).sum())


# ---------------------------------------------------------------------------
# spins + damped cavity


def _cavity_operators(cav: CavityParams, params: EnsembleParams, symmetric: bool):
    N = params.N
    nf = cav.fock_cutoff if cav.fock_cutoff is not None else N + 3
    a = sp.diags(np.sqrt(np.arange(1, nf)), 1, shape=(nf, nf)).tocsr()
    If = sp.identity(nf, format="csr")
    if symmetric:
        j = N / 2
        m = _m_values(j)
        smat = sp.diags(np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] - 1)), -1,
                        shape=(N + 1, N + 1)).tocsr()
        ds = N + 1
        Is = sp.identity(ds, format="csr")
        g = float(cav.g)
        Sm = sp.kron(smat, If).tocsr()
        A = sp.kron(Is, a).tocsr()
        H = cav.Delta * (A.T @ A) + g * (Sm @ A.T + Sm.T @ A)
        jumps = [np.sqrt(cav.kappa) * A] if cav.kappa else []
        coll = Sm
        sz = sp.kron(sp.diags(m), If)
        local = []
    else:
        ops = full_space_operators(N)
        ds = 2 ** N
        Is = sp.identity(ds, format="csr")
        A = sp.kron(Is, a).tocsr()
        g = cav.couplings(N)
        H = cav.Delta * (A.T @ A)
        for gi, L in zip(g, ops["sigma_minus"]):
            Li = sp.kron(L, If).tocsr()
            H = H + gi * (Li @ A.T + Li.T @ A)
        jumps = [np.sqrt(cav.kappa) * A] if cav.kappa else []
        coll = sp.kron(ops["sm"], If).tocsr()
        sz = sp.kron(ops["sz"], If)
        local = []
        for L in ops["sigma_minus"]:
            if params.gamma_rel:
                local.append(np.sqrt(params.gamma_rel) * sp.kron(L, If).tocsr())
            if params.gamma_phi:
                zi = (L.T @ L - L @ L.T)
                local.append(np.sqrt(params.gamma_phi / 2) * sp.kron(zi, If).tocsr())
    if params.Gamma:
        jumps.append(np.sqrt(params.Gamma * (params.n_th + 1)) * coll)
        if params.n_th:
            jumps.append(np.sqrt(params.Gamma * params.n_th) * coll.T.tocsr())
    jumps += local
    sm_full = coll
    ops = dict(H=H.tocsr(), jumps=jumps, sm=sm_full, sz=sz.tocsr(), a=A, nf=nf, ds=ds)
    return ops


def evolve_cavity_qme(cav: CavityParams, params: EnsembleParams, state0, grid, *,
                      rtol=_ode.DEFAULT_RTOL, atol=_ode.DEFAULT_ATOL) -> Trajectory:
    """Joint spin + cavity Lindblad evolution.

    ``H = Delta a^dag a + sum_j g_j (sigma_-^j a^dag + sigma_+^j a)`` with
    ``kappa D[a]`` and any spin dissipators in ``params``.  Uniform coupling
    without single-spin rates runs in the symmetric spin sector; otherwise the
    full ``2^N`` spin space is used.

    ``state0`` is a spin state (:class:`DickeBlockState` in the symmetric
    sector, a symmetric-sector amplitude vector, or a full spin density
    matrix); the cavity starts in vacuum.  A joint density matrix of matching
    dimension is accepted as well.

    Raises
    ------
    CutoffError
        If the top Fock level ever holds more than ``1e-6`` population.
    """
    N = params.N
    symmetric = cav.uniform and not params.has_local
    ops = _cavity_operators(cav, params, symmetric)
    ds, nf = ops["ds"], ops["nf"]
    D = ds * nf
    if D > CAVITY_MAX_DIM:
        raise ResourceError(f"joint dimension {D} exceeds {CAVITY_MAX_DIM}")
    rho0 = _joint_initial(state0, N, ds, nf, symmetric)
    H, jumps = ops["H"], ops["jumps"]
    Heff = (H - 0.5j * sum((L.conj().T @ L for L in jumps), sp.csr_matrix((D, D)))).tocsr()
    jpairs = [(L, L.conj().T.tocsr()) for L in jumps]

    def rhs(t, y):
        rho = y.reshape(D, D)
        out = -1j * (Heff @ rho)
        out = out + out.conj().T
        for L, Ld in jpairs:
            out += L @ (Ld.T @ rho.T).T
        return out.ravel()

    grid = np.asarray(grid, float)
    ys, _ = _ode.integrate(rhs, rho0.ravel(), grid, rtol=rtol, atol=atol)
    sm, sz, A = ops["sm"], ops["sz"], ops["a"]
    sx = (0.5 * (sm + sm.T)).tocsr()
    sy = (0.5j * (sm - sm.T)).tocsr()
    top = sp.kron(sp.identity(ds), sp.diags([0.0] * (nf - 1) + [1.0])).tocsr()
    nphot = (A.T @ A).tocsr()
    obs = {"sx": sx, "sy": sy, "sz": sz, "sx2": sx @ sx, "sy2": sy @ sy,
           "sz2": sz @ sz, "syz": 0.5 * (sy @ sz + sz @ sy), "top": top,
           "n": nphot}
    mom = {k: [] for k in obs}
    mom["trace"] = []
    for y in ys:
        rho = y.reshape(D, D)
        for k, o in obs.items():
            mom[k].append(np.asarray(o.multiply(rho.T).sum()).item().real)
        mom["trace"].append(np.trace(rho).real)
    mom = {k: np.array(v) for k, v in mom.items()}
    if np.max(mom["top"]) > 1e-6:
        raise CutoffError(f"top Fock level population {np.max(mom['top']):.2e} "
                          f"exceeds 1e-6; raise fock_cutoff above {nf}")
    return _moments_to_trajectory(grid, mom, N, extras={"photons": mom["n"]})


def _joint_initial(state0, N, ds, nf, symmetric):
    vac = np.zeros((nf, nf), complex)
    vac[0, 0] = 1.0
    if isinstance(state0, DickeBlockState):
        if symmetric:
            spin = state0.block(N / 2)
        else:
            spin = state0.to_full()
    else:
        state0 = np.asarray(state0, complex)
        if state0.ndim == 1:
            spin = np.outer(state0, state0.conj())
        elif state0.shape == (ds * nf, ds * nf):
            return state0
        else:
            spin = state0
    if spin.shape != (ds, ds):
        raise ValueError(f"spin state must be {ds}x{ds}, got {spin.shape}")
    return np.kron(spin, vac)
