"""Collective spin algebra in the Dicke basis.

States of N spin-1/2 systems that are invariant under permutations of the
spins are block diagonal over the total-spin sectors ``j``.  Each sector
carries a ``(2j+1) x (2j+1)`` matrix and appears ``d_N(j)`` times, so a
permutation-symmetric density matrix is stored as ``{j: A_j}`` together
with the degeneracies.

Matrices are indexed by ``m`` in descending order, ``m = j, j-1, ..., -j``,
so that ``S_z = diag(j, ..., -j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Union

import numpy as np
from scipy.special import gammaln, xlogy

__all__ = [
    "OperatorSet",
    "DickeBlockState",
    "ProtocolConfig",
    "j_values",
    "block_degeneracy",
    "collective_operators",
    "coherent_spin_state",
    "dicke_state",
    "expectation",
    "schur_basis",
]


def _twice(j) -> int:
    tj = Fraction(j) * 2
    if tj.denominator != 1:
        raise ValueError(f"j={j} is not a half-integer")
    return int(tj)


def _check_pair(N: int, j) -> int:
    if int(N) != N or N < 1:
        raise ValueError(f"spin count must be a positive integer, got {N}")
    tj = _twice(j)
    if tj < 0 or tj > N or (N - tj) % 2:
        raise ValueError(f"j={j} is not a valid total spin for N={N}")
    return tj


def j_values(N: int) -> list[float]:
    """Total-spin values ``N/2, N/2 - 1, ..., (N mod 2)/2``."""
    return [tj / 2 for tj in range(N, -1, -2)]


def block_degeneracy(N: int, j) -> int:
    """Multiplicity of the spin-``j`` irreducible sector in N spin-1/2 systems.

    ``d_N(j) = C(N, N/2 - j) - C(N, N/2 - j - 1)`` in exact integer
    arithmetic.
    """
    tj = _check_pair(N, j)
    k = (int(N) - tj) // 2
    return math.comb(int(N), k) - (math.comb(int(N), k - 1) if k else 0)


def _m_values(j: float) -> np.ndarray:
    return j - np.arange(int(round(2 * j)) + 1)


@dataclass(frozen=True)
class OperatorSet:
    """Collective spin matrices of the spin-``j`` sector (hbar = 1)."""

    j: float
    sp: np.ndarray
    sm: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    @property
    def dim(self) -> int:
        return self.sz.shape[0]


@lru_cache(maxsize=256)
def _operators(tj: int) -> OperatorSet:
    j = tj / 2
    m = _m_values(j)
    # <j, m+1| S_+ |j, m>: row index of m+1 is one above that of m
    up = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    sp = np.diag(up, 1).astype(complex)
    sm = sp.conj().T.copy()
    sx = 0.5 * (sp + sm)
    sy = -0.5j * (sp - sm)
    sz = np.diag(m).astype(complex)
    for a in (sp, sm, sx, sy, sz):
        a.setflags(write=False)
    return OperatorSet(j, sp, sm, sx, sy, sz)


def collective_operators(N: int, j) -> OperatorSet:
    """Collective spin operators of the spin-``j`` sector of N spins.

    Raises
    ------
    ValueError
        If ``j`` is not an allowed total spin for ``N`` spins.
    """
    return _operators(_check_pair(N, j))


Observable = Union[str, np.ndarray, Callable[[OperatorSet], np.ndarray]]


@dataclass(frozen=True)
class DickeBlockState:
    """Permutation-symmetric density matrix ``rho = sum_j A_j (x) 1_{d_N(j)}``.

    Parameters
    ----------
    N : int
        Number of spins.
    blocks : mapping
        ``j -> A_j``; sectors that are absent are zero.
    eps_pos : float
        Tolerated negative eigenvalue in :meth:`check`.
    """

    N: int
    blocks: Mapping[float, np.ndarray]
    eps_pos: float = 1e-9
    weights: Mapping[float, int] = field(init=False)

    def __post_init__(self):
        clean = {}
        for j, a in self.blocks.items():
            j = _check_pair(self.N, j) / 2
            a = np.array(a, dtype=complex)
            d = int(round(2 * j)) + 1
            if a.shape != (d, d):
                raise ValueError(f"block j={j} must be {d}x{d}, got {a.shape}")
            a.setflags(write=False)
            clean[j] = a
        object.__setattr__(self, "blocks", dict(sorted(clean.items(), reverse=True)))
        object.__setattr__(
            self, "weights", {j: block_degeneracy(self.N, j) for j in self.blocks})

    def trace(self) -> float:
        return float(sum(self.weights[j] * np.trace(a).real
                         for j, a in self.blocks.items()))

    def block(self, j) -> np.ndarray:
        j = _check_pair(self.N, j) / 2
        if j in self.blocks:
            return self.blocks[j]
        d = int(round(2 * j)) + 1
        return np.zeros((d, d), complex)

    def check(self, atol: float = 1e-9) -> None:
        """Raise ``ValueError`` if trace, Hermiticity or positivity fail."""
        if abs(self.trace() - 1) > atol:
            raise ValueError(f"trace {self.trace()} differs from one")
        for j, a in self.blocks.items():
            if not np.allclose(a, a.conj().T, atol=atol):
                raise ValueError(f"block j={j} is not Hermitian")
            lo = np.linalg.eigvalsh(0.5 * (a + a.conj().T)).min()
            if lo < -self.eps_pos:
                raise ValueError(f"block j={j} has eigenvalue {lo:.3e}")

    def to_full(self) -> np.ndarray:
        """Embed into the ``2^N``-dimensional product space (small N only)."""
        basis = schur_basis(self.N)
        dim = 2 ** self.N
        rho = np.zeros((dim, dim), complex)
        for j, a in self.blocks.items():
            v = basis[j]                        # (d_j, 2j+1, 2^N)
            rho += np.einsum("amk,mn,anl->kl", v, a, v.conj())
        return rho


def _sector_op(ops: OperatorSet, op: Observable) -> np.ndarray:
    if isinstance(op, str):
        return getattr(ops, op)
    if callable(op):
        return op(ops)
    return np.asarray(op)


def expectation(state: DickeBlockState, op: Observable):
    """Degeneracy-weighted expectation value ``sum_j d_N(j) tr(A_j O_j)``.

    ``op`` is either the name of an :class:`OperatorSet` attribute
    (``"sz"``), a callable mapping the sector's :class:`OperatorSet` to a
    matrix (``lambda S: S.sx @ S.sx``), or an explicit matrix when the state
    occupies a single sector.  Results with negligible imaginary part are
    returned as ``float``.
    """
    total = 0j
    for j, a in state.blocks.items():
        o = _sector_op(_operators(int(round(2 * j))), op)
        if o.shape != a.shape:
            raise ValueError(f"operator shape {o.shape} does not match block j={j}")
        total += state.weights[j] * np.sum(a * o.T)
    scale = max(1.0, abs(total))
    return total.real if abs(total.imag) <= 1e-12 * scale else total


def _css_amplitudes(N: int, theta: float, azimuth: float) -> np.ndarray:
    k = np.arange(N + 1)                        # number of down spins, m = N/2 - k
    logc = 0.5 * (gammaln(N + 1) - gammaln(k + 1) - gammaln(N - k + 1))
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    logmag = logc + xlogy(N - k, abs(c)) + xlogy(k, abs(s))
    sign = np.sign(c) ** (N - k) * np.sign(s) ** k
    return sign * np.exp(logmag) * np.exp(1j * k * azimuth)


def coherent_spin_state(N: int, theta: float, azimuth: float = 0.0,
                        as_vector: bool = False):
    """Coherent spin state with all spins along ``(theta, azimuth)``.

    ``<S_z> = (N/2) cos(theta)`` and the transverse polarization points
    along ``(cos azimuth, sin azimuth)``; ``azimuth = pi/2`` tips the state
    toward ``+y``.

    Returns
    -------
    DickeBlockState, or the ``(N+1)`` amplitude vector if ``as_vector``.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"spin count must be a positive integer, got {N}")
    psi = _css_amplitudes(int(N), theta, azimuth)
    if as_vector:
        return psi
    return DickeBlockState(int(N), {N / 2: np.outer(psi, psi.conj())})


def dicke_state(N: int, m, j=None) -> DickeBlockState:
    """Projector onto a single ``|j, m>`` (``j = N/2`` by default)."""
    j = N / 2 if j is None else j
    tj = _check_pair(N, j)
    idx = int(round(tj / 2 - m))
    if not 0 <= idx <= tj:
        raise ValueError(f"m={m} outside sector j={j}")
    a = np.zeros((tj + 1, tj + 1), complex)
    a[idx, idx] = 1.0 / block_degeneracy(N, j)
    return DickeBlockState(N, {tj / 2: a})


@lru_cache(maxsize=16)
def _schur_basis(N: int) -> dict:
    # single spin, basis index 0 = up
    if N == 1:
        return {1: np.eye(2, dtype=float)[None, :, :]}
    prev = _schur_basis(N - 1)
    out: dict[int, list] = {}
    for tk, vk in prev.items():         # vk: (d_k, 2k+1, 2^(N-1))
        k = tk / 2
        mk = _m_values(k)
        up = np.array([1.0, 0.0])
        dn = np.array([0.0, 1.0])
        for tJ in (tk + 1, tk - 1):
            if tJ < 0:
                continue
            J = tJ / 2
            rows = []
            for M in _m_values(J):
                vec = np.zeros((vk.shape[0], 2 ** N))
                a = np.sqrt((k + M + 0.5) / (2 * k + 1))
                b = np.sqrt((k - M + 0.5) / (2 * k + 1))
                cu, cd = (a, b) if tJ > tk else (-b, a)
                for mu, coef, s in ((M - 0.5, cu, up), (M + 0.5, cd, dn)):
                    if abs(mu) <= k + 1e-12 and coef != 0:
                        i = int(round(k - mu))
                        vec += coef * np.kron(vk[:, i, :], s)
                rows.append(vec)
            out.setdefault(tJ, []).append(np.stack(rows, axis=1))
    return {tJ: np.concatenate(parts, axis=0) for tJ, parts in out.items()}


def schur_basis(N: int) -> dict:
    """Orthonormal Dicke basis of the full space, ``j -> (d_N(j), 2j+1, 2^N)``.

    Built by adding spins one at a time with spin-1/2 Clebsch-Gordan
    coefficients.  Product-basis index bit 0 (most significant) is spin 1;
    bit value 0 means spin up.
    """
    if N > 14:
        raise MemoryError("full-space Dicke basis limited to N <= 14")
    return {tj / 2: v for tj, v in _schur_basis(int(N)).items()}


@dataclass(frozen=True)
class ProtocolConfig:
    """Signal angle, CSS orientation and time grid for one protocol run."""

    phi: float
    theta: float = 0.0
    azimuth: float = np.pi / 2
    grid: np.ndarray = field(default_factory=lambda: np.linspace(0, 1, 101))

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if self.phi < 0:
            raise ValueError("phi must be non-negative")
        if g.ndim != 1 or g.size < 2 or g[0] != 0 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing and start at 0")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)
