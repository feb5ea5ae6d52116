"""Second-order cumulant equations generated from a master equation.

Collective spin operators are represented as noncommutative polynomials in
``S_x, S_y, S_z`` (letters 0, 1, 2).  For a Lindblad generator built from a
Hamiltonian, collective jump operators and identical single-spin jump
operators, :class:`MomentSystem` derives the Heisenberg-picture generator
acting on all first and second moments and closes third-order terms by
setting the third cumulant to zero.  The default ``closure="ordered"``
rewrites every word in sorted ``S_x S_y S_z`` order and applies the Gaussian
rule to the sorted product,

    <ABC> = <AB><C> + <AC><B> + <A><BC> - 2<A><B><C>,

while ``closure="symmetric"`` first rewrites words in Weyl order and closes

    <{ABC}_sym> = M_ab m_c + M_ac m_b + M_bc m_a - 2 m_a m_b m_c

with ``M_ab`` the symmetrized second moment.  The closed equations become a
nine-dimensional real ODE for ``m_a`` and the covariances ``C_ab``.

Single-spin terms are reduced exactly to collective form: for a one-site
jump operator ``l``,

    sum_i D^dag[l_i](S_a S_b) = D_a S_b + S_a D_b + sum_i [l^dag, s_a]_i [s_b, l]_i

where ``D_a = sum_i D^dag[l_i](s_a^i)``; each single-site product is a 2x2
matrix and expands into ``1`` and the Pauli matrices.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement, permutations

import numpy as np

__all__ = ["Poly", "spin", "lowering", "MomentSystem", "PAIRS", "SIGMA_MINUS", "SIGMA_Z"]

PAIRS = tuple(combinations_with_replacement(range(3), 2))

_EPS = np.zeros((3, 3, 3))
for _a, _b, _c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _EPS[_a, _b, _c] = 1.0
    _EPS[_b, _a, _c] = -1.0

_PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], complex)


class Poly(dict):
    """Mapping ``word -> coefficient`` with ``+``, ``*``, scalar ``*``."""

    def __add__(self, other):
        out = Poly(self)
        for w, c in other.items():
            out[w] = out.get(w, 0) + c
        return out.clean()

    def __neg__(self):
        return Poly({w: -c for w, c in self.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly({w: c * other for w, c in self.items()}).clean()
        out = Poly()
        for w1, c1 in self.items():
            for w2, c2 in other.items():
                w = w1 + w2
                out[w] = out.get(w, 0) + c1 * c2
        return out.clean()

    __rmul__ = __mul__

    def dag(self):
        return Poly({w[::-1]: np.conj(c) for w, c in self.items()})

    def clean(self, tol=1e-14):
        return Poly({w: c for w, c in self.items() if abs(c) > tol})

    def degree(self):
        return max((len(w) for w in self), default=0)


def spin(*letters, coef=1.0) -> Poly:
    return Poly({tuple(letters): coef})


ONE = Poly({(): 1.0})


def comm(a: Poly, b: Poly) -> Poly:
    return a * b - b * a


@lru_cache(maxsize=None)
def _normal_word(w: tuple) -> tuple:
    """Sorted-order expansion of a word as ``((word, coef), ...)``."""
    for i in range(len(w) - 1):
        a, b = w[i], w[i + 1]
        if a > b:
            out = {}
            for ww, cc in _normal_word(w[:i] + (b, a) + w[i + 2:]):
                out[ww] = out.get(ww, 0) + cc
            c = 3 - a - b
            # S_a S_b = S_b S_a + i eps_abc S_c
            for ww, cc in _normal_word(w[:i] + (c,) + w[i + 2:]):
                out[ww] = out.get(ww, 0) + 1j * _EPS[a, b, c] * cc
            return tuple(out.items())
    return ((w, 1.0),)


def normal(p: Poly) -> Poly:
    out = Poly()
    for w, c in p.items():
        for ww, cc in _normal_word(w):
            out[ww] = out.get(ww, 0) + c * cc
    return out.clean()


@lru_cache(maxsize=None)
def _sym_normal(letters: tuple) -> tuple:
    perms = list(permutations(letters))
    acc = Poly()
    for p in perms:
        acc = acc + normal(Poly({p: 1.0 / len(perms)}))
    return tuple(acc.items())


def to_symmetric(p: Poly) -> Poly:
    """Rewrite a polynomial as a combination of fully symmetrized words.

    Keys of the result are sorted letter tuples standing for the symmetrized
    product of those letters.
    """
    rest = normal(p)
    out = Poly()
    while rest:
        deg = rest.degree()
        top = {w: c for w, c in rest.items() if len(w) == deg}
        for w, c in top.items():
            out[w] = out.get(w, 0) + c
            rest = rest - Poly(dict(_sym_normal(w))) * c
        rest = rest.clean()
    return out.clean()


def _site_expand(m: np.ndarray):
    """``m = c0 * 1 + sum_b c_b s_b`` with ``s_b = sigma_b / 2``."""
    c0 = np.trace(m) / 2
    cb = np.array([np.trace(m @ s) for s in _PAULI])
    return c0, cb


def _site_adjoint(l: np.ndarray, x: np.ndarray) -> np.ndarray:
    ld = l.conj().T
    return ld @ x @ l - 0.5 * (ld @ l @ x + x @ ld @ l)


class MomentSystem:
    """Closed second-order moment equations for a collective-spin generator.

    Parameters
    ----------
    N : int
        Spin count (enters through single-spin terms).
    hamiltonian : Poly, optional
    collective : list of (rate, Poly)
        Terms ``rate * D[L]`` with ``L`` a polynomial in the collective spin.
    local : list of (rate, 2x2 array)
        Terms ``rate * sum_i D[l_i]``.
    """

    def __init__(self, N, hamiltonian=None, collective=(), local=(),
                 closure="ordered"):
        if closure not in ("ordered", "symmetric"):
            raise ValueError(f"unknown closure {closure!r}")
        self.N = N
        self.closure = closure
        H = hamiltonian if hamiltonian is not None else Poly()
        targets = [spin(a) for a in range(3)] + \
                  [0.5 * (spin(a, b) + spin(b, a)) for a, b in PAIRS]
        reorder = to_symmetric if closure == "symmetric" else normal
        self._exprs = [reorder(self._adjoint(o, H, collective, local))
                       for o in targets]
        self._compile()

    def _adjoint(self, o: Poly, H, collective, local) -> Poly:
        out = comm(H, o) * 1j if H else Poly()
        for rate, L in collective:
            Ld = L.dag()
            out = out + rate * (Ld * o * L - 0.5 * (Ld * L * o + o * Ld * L))
        for rate, l in local:
            out = out + rate * self._local_adjoint(o, np.asarray(l, complex))
        return out

    def _site_poly(self, m):
        c0, cb = _site_expand(m)
        p = Poly({(): c0 * self.N})
        for b in range(3):
            p = p + spin(b, coef=cb[b])
        return p

    def _local_adjoint(self, o: Poly, l) -> Poly:
        ld = l.conj().T
        single = [self._site_poly(_site_adjoint(l, _PAULI[a] / 2)) for a in range(3)]
        out = Poly()
        for w, c in o.items():
            if len(w) == 0:
                continue
            if len(w) == 1:
                out = out + single[w[0]] * c
            elif len(w) == 2:
                a, b = w
                sa, sb = _PAULI[a] / 2, _PAULI[b] / 2
                cross = (ld @ sa - sa @ ld) @ (sb @ l - l @ sb)
                out = out + (single[a] * spin(b) + spin(a) * single[b]
                             + self._site_poly(cross)) * c
            else:
                raise ValueError("local terms supported up to second order")
        return out

    def _compile(self):
        n = len(self._exprs)
        self._c0 = np.zeros(n, complex)
        self._c1 = np.zeros((n, 3), complex)
        self._c2 = np.zeros((n, 3, 3), complex)
        self._c3 = np.zeros((n, 3, 3, 3), complex)
        for k, e in enumerate(self._exprs):
            for w, c in e.items():
                if len(w) == 0:
                    self._c0[k] += c
                elif len(w) == 1:
                    self._c1[k][w] += c
                elif len(w) == 2:
                    self._c2[k][w] += c
                elif len(w) == 3:
                    self._c3[k][w] += c
                else:
                    raise ValueError("closure supports generators up to cubic order")
        imag = max(np.abs(a.imag).max() for a in (self._c0, self._c1, self._c2, self._c3))
        if self.closure == "symmetric":
            if imag > 1e-10:
                raise ValueError("non-Hermitian moment equations")
            self._c0, self._c1, self._c2, self._c3 = (
                a.real for a in (self._c0, self._c1, self._c2, self._c3))

    @classmethod
    def combine(cls, terms) -> "MomentSystem":
        """Weighted sum ``sum_k w_k * system_k`` of compiled systems.

        Generators are linear in their rates, so unit-rate systems can be
        compiled once and rescaled.  All systems must share ``N`` and closure.
        """
        terms = list(terms)
        if not terms:
            raise ValueError("need at least one term")
        first = terms[0][1]
        out = object.__new__(cls)
        out.N, out.closure = first.N, first.closure
        out._exprs = None
        for name in ("_c0", "_c1", "_c2", "_c3"):
            setattr(out, name, sum(w * getattr(s, name) for w, s in terms))
        return out

    @staticmethod
    def pack(m, C) -> np.ndarray:
        return np.concatenate([m, [C[a, b] for a, b in PAIRS]])

    @staticmethod
    def unpack(y):
        m = np.asarray(y[:3])
        C = np.zeros((3, 3))
        for k, (a, b) in enumerate(PAIRS):
            C[a, b] = C[b, a] = y[3 + k]
        return m, C

    def moment_rates(self, m, M):
        """Rates of ``m_a`` and symmetrized ``M_ab`` from closed moments."""
        if self.closure == "ordered":
            # sorted-order pair moments <S_a S_b> = M_ab + (i/2) eps_abc m_c
            M = M + 0.5j * np.einsum("abc,c->ab", _EPS, m)
        cube = (np.einsum("ab,c->abc", M, m) + np.einsum("ac,b->abc", M, m)
                + np.einsum("bc,a->abc", M, m) - 2 * np.einsum("a,b,c->abc", m, m, m))
        r = self._c0 + self._c1 @ m + np.einsum("kab,ab->k", self._c2, M) \
            + np.einsum("kabc,abc->k", self._c3, cube)
        r = r.real
        return r[:3], r[3:]

    def rhs(self, t, y):
        m, C = self.unpack(y)
        M = C + np.outer(m, m)
        dm, dM = self.moment_rates(m, M)
        dC = np.array([dM[k] - dm[a] * m[b] - m[a] * dm[b]
                       for k, (a, b) in enumerate(PAIRS)])
        return np.concatenate([dm, dC])


def lowering() -> Poly:
    """``S_- = S_x - i S_y``."""
    return spin(0) + spin(1, coef=-1j)


SIGMA_MINUS = np.array([[0, 0], [1, 0]], complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], complex)
