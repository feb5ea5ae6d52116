"""Mean-field (second-order cumulant) models of the amplification dynamics.

The small-signal initial state is a coherent spin state tipped from the north
pole toward ``+y`` by ``phi``.  Dissipative and coherent (undamped cavity)
systems are integrated as printed in their standard form, with terms of order
``phi^2`` dropped; covariance initial conditions are the ``O(phi)`` values
``C_xx = C_yy = N/4``, ``C_zz = C_yz = 0`` unless ``exact_css`` asks for the
full coherent-state covariances.

All integrators return a :class:`CumulantTrajectory` holding dense output so
that peak times can be refined between grid points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _ode
from ._peaks import first_local_max
from .liouvillian import TRAJECTORY_COLUMNS, EnsembleParams

__all__ = [
    "CumulantTrajectory",
    "SemiclassicalResult",
    "integrate_dissipative_cumulant",
    "integrate_reduced",
    "reduced_gain_closed_form",
    "integrate_coherent_cumulant",
    "integrate_semiclassical",
    "analytic_gain_collective",
    "coherent_constraints",
    "CAVITY_COLUMNS",
]

CAVITY_COLUMNS = ("Q", "P", "Cqq", "Cpp", "Cqy", "Cqz", "Cpx")


@dataclass(frozen=True)
class CumulantTrajectory:
    """Sampled cumulant variables keyed by name (``"Sy"``, ``"Cxx"``, ...).

    Variables not evolved by a model but fixed by symmetry (``Sx``, ``Cxy``,
    ``Cxz``, ``P``) read as zero.
    """

    times: np.ndarray
    values: dict
    N: int
    names: tuple
    sol: Optional[Callable] = field(default=None, repr=False, compare=False)

    _ZERO = ("Sx", "P", "Cxy", "Cxz")

    def __getitem__(self, key) -> np.ndarray:
        if key in self.values:
            return self.values[key]
        if key == "Cyy" and "Cxx" in self.values:
            return self.values["Cxx"]
        if key in self._ZERO:
            return np.zeros_like(self.times)
        raise KeyError(key)

    def __contains__(self, key):
        try:
            self[key]
        except KeyError:
            return False
        return True

    def at(self, t, key="Sy"):
        """Continuous value of one variable from the dense output."""
        if self.sol is None:
            raise ValueError("no dense output stored")
        y = self.sol(np.asarray(t, float))
        return y[self.names.index(key)]

    def gain(self) -> np.ndarray:
        sy = self["Sy"]
        return sy / sy[0]

    def peak(self, key="Sy"):
        """``(t_max, G_max)`` of the first maximum of ``key`` relative to t=0."""
        y0 = self[key][0]
        f = None if self.sol is None else (lambda s: self.at(s, key) / y0)
        t, g, _ = first_local_max(self.times, self[key] / y0, f)
        return t, g

    def to_csv(self, path) -> None:
        """Base trajectory columns, then cavity moments when present."""
        cols = {"t": self.times, "Sx": self["Sx"], "Sy": self["Sy"], "Sz": self["Sz"],
                "VarSx": self["Cxx"], "VarSy": self["Cyy"],
                "VarSz": self["Czz"] if "Czz" in self else np.zeros_like(self.times),
                "Cyz": self["Cyz"] if "Cyz" in self else np.zeros_like(self.times),
                "trace": np.ones_like(self.times)}
        header = list(TRAJECTORY_COLUMNS)
        if "Q" in self.values:
            for k in CAVITY_COLUMNS:
                cols[k] = self[k] if k in self else np.zeros_like(self.times)
            header += list(CAVITY_COLUMNS)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in zip(*(cols[h] for h in header)):
                w.writerow([format(float(x), ".15g") for x in row])


def _run(rhs, names, y0, grid, N, rtol, atol):
    grid = np.asarray(grid, float)
    ys, sol = _ode.integrate(rhs, np.asarray(y0, float), grid, rtol=rtol,
                             atol=atol, dense=True)
    values = {n: ys[:, k] for k, n in enumerate(names)}
    return CumulantTrajectory(grid, values, N, tuple(names), sol)


def _css_moments(N, phi, exact):
    if exact:
        s, c = np.sin(phi), np.cos(phi)
        return dict(Sy=N / 2 * s, Sz=N / 2 * c, Cxx=N / 4, Cyy=N / 4 * c * c,
                    Czz=N / 4 * s * s, Cyz=-N / 4 * s * c)
    return dict(Sy=N / 2 * np.sin(phi), Sz=N / 2, Cxx=N / 4, Cyy=N / 4,
                Czz=0.0, Cyz=0.0)


def integrate_dissipative_cumulant(params: EnsembleParams, phi, grid, *,
                                   rtol=_ode.DEFAULT_RTOL, atol=_ode.DEFAULT_ATOL,
                                   exact_css=False) -> CumulantTrajectory:
    """Five-variable mean-field system for ``S_y, S_z, C_xx, C_zz, C_yz``.

    Includes collective decay at thermal occupation ``n_th`` and single-spin
    relaxation/dephasing; ``C_yy`` is identified with ``C_xx``.
    """
    N = params.N
    G, n, gr, gp = params.Gamma, params.n_th, params.gamma_rel, params.gamma_phi
    k = 1 + 2 * n

    def rhs(t, y):
        sy, sz, cxx, czz, cyz = y
        return [
            -(G / 2 + G * n - G * sz + gp + gr / 2) * sy + G * cyz,
            -G * k * sz - 2 * G * cxx - gr * (sz + N / 2),
            -(G * k + 2 * gp + gr - 2 * G * sz) * cxx + G * k * sz ** 2
            - G / 2 * sz + N / 2 * (gp + gr / 2),
            2 * G * k * cxx + (G + gr) * sz + gr / 2 * N,
            -(2.5 * G * k - G * sz + gp + 1.5 * gr) * cyz
            - (G * k * sz + 2 * G * cxx - G / 4 - gr / 2) * sy,
        ]

    m = _css_moments(N, phi, exact_css)
    y0 = [m["Sy"], m["Sz"], m["Cxx"], m["Czz"], m["Cyz"]]
    return _run(rhs, ("Sy", "Sz", "Cxx", "Czz", "Cyz"), y0, grid, N, rtol, atol)


def integrate_reduced(params: EnsembleParams, phi, grid, *, rtol=_ode.DEFAULT_RTOL,
                      atol=_ode.DEFAULT_ATOL) -> CumulantTrajectory:
    """Two-variable system ``dS_y/dt = -Gamma (1/2 + n_th - S_z) S_y``,
    ``dS_z/dt = -Gamma [(N/2)(N/2+1) + S_z (1 + 2 n_th - S_z)]``.

    Obtained by eliminating ``C_xx`` through total-spin conservation and
    dropping ``C_zz`` and ``C_yz``.
    """
    if params.has_local:
        raise ValueError("reduced system requires gamma_rel = gamma_phi = 0")
    N, G, n = params.N, params.Gamma, params.n_th
    cas = N / 2 * (N / 2 + 1)

    def rhs(t, y):
        sy, sz = y
        return [-G * (0.5 + n - sz) * sy, -G * (cas + sz * (1 + 2 * n - sz))]

    return _run(rhs, ("Sy", "Sz"), [N / 2 * np.sin(phi), N / 2], grid, N, rtol, atol)


def reduced_gain_closed_form(N, Gamma, t, n_th=0.0):
    """Exact solution of the reduced system for ``S_y(t)/S_y(0)``.

    With ``u = S_z - (1 + 2 n_th)/2`` the ``S_z`` equation reads
    ``du/dt = -Gamma (A^2 - u^2)``, ``A^2 = (N/2)(N/2+1) + (1+2n_th)^2/4``,
    so ``u = -A tanh(A Gamma (t - t0))`` and
    ``G = cosh(A Gamma t0) / cosh(A Gamma (t - t0))`` with
    ``tanh(A Gamma t0) = u(0)/A``.
    """
    t = np.asarray(t, float)
    h = (1 + 2 * n_th) / 2
    A = np.sqrt(N / 2 * (N / 2 + 1) + h * h)
    x0 = np.arctanh((N / 2 - h) / A)
    return np.cosh(x0) / np.cosh(A * Gamma * t - x0)


def analytic_gain_collective(N, Gamma, t):
    """Large-N mean-field gain
    ``e^{Gamma t/2} cosh(ln(N)/2) / cosh(N Gamma t/2 - ln(N)/2)``.

    Peaks at ``t = ln(N)/(Gamma N)`` with value close to ``sqrt(N)/2``.
    """
    if N < 2:
        raise ValueError("closed form requires N >= 2")
    t = np.asarray(t, float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    h = 0.5 * np.log(N)
    return np.exp(Gamma * t / 2) * np.cosh(h) / np.cosh(N * Gamma * t / 2 - h)


COHERENT_NAMES = ("Q", "Sy", "Sz", "Cqq", "Cqy", "Cqz", "Cpp", "Cpx", "Cxx", "Cyy",
                  "Cyz", "Czz")


def integrate_coherent_cumulant(g, N, phi, grid, *, rtol=_ode.DEFAULT_RTOL,
                                atol=_ode.DEFAULT_ATOL,
                                exact_css=False) -> CumulantTrajectory:
    """Twelve-variable cumulant system of the resonant Tavis-Cummings model.

    Cavity quadratures are ``Q = (a^dag + a)/sqrt(2)``,
    ``P = i (a^dag - a)/sqrt(2)``; the mode starts in vacuum
    (``C_QQ = C_PP = 1/2``).  ``P``, ``S_x`` and the remaining covariances stay
    zero.  Two constants of motion are exposed through
    :func:`coherent_constraints`.
    """
    r = np.sqrt(2) * g

    def rhs(t, y):
        Q, Sy, Sz, Cqq, Cqy, Cqz, Cpp, Cpx, Cxx, Cyy, Cyz, Czz = y
        return [
            -r * Sy,
            -r * (Cqz + Sz * Q),
            r * (Cpx + Cqy + Sy * Q),
            -2 * r * Cqy,
            -r * (Cqz * Q + Cqq * Sz + Cyy),
            r * (Cqy * Q + Cqq * Sy - Cyz),
            -2 * r * Cpx,
            -r * (Cpp * Sz + Cxx),
            -2 * r * Cpx * Sz,
            -2 * r * (Cyz * Q + Cqy * Sz),
            r * (Cqy * Sy + (Cyy - Czz) * Q - Cqz * Sz),
            2 * r * (Cyz * Q + Cqz * Sy),
        ]

    m = _css_moments(N, phi, exact_css)
    y0 = [0.0, m["Sy"], m["Sz"], 0.5, 0.0, 0.0, 0.5, 0.0, m["Cxx"], m["Cyy"],
          m["Cyz"], m["Czz"]]
    return _run(rhs, COHERENT_NAMES, y0, grid, N, rtol, atol)


def coherent_constraints(traj: CumulantTrajectory):
    """Total spin and total excitation number along a coherent trajectory."""
    spin = (traj["Cxx"] + traj["Sy"] ** 2 + traj["Cyy"] + traj["Sz"] ** 2
            + traj["Czz"])
    exc = 0.5 * (traj["Cqq"] + traj["Q"] ** 2 + traj["Cpp"] - 1) + traj["Sz"]
    return spin, exc


@dataclass(frozen=True)
class SemiclassicalResult:
    """Fluctuation-free trajectory with a monotonicity diagnostic.

    ``first_peak`` is the time of the first interior maximum of ``S_y`` on
    the grid, or ``None`` when ``S_y`` grows monotonically throughout.
    """

    times: np.ndarray
    Q: np.ndarray
    Sy: np.ndarray
    monotone: bool
    first_peak: Optional[float]

    def gain(self):
        return self.Sy / self.Sy[0]


def integrate_semiclassical(g, N, phi, grid, *, rtol=_ode.DEFAULT_RTOL,
                            atol=_ode.DEFAULT_ATOL) -> SemiclassicalResult:
    """Covariance-free limit: ``dQ/dt = -sqrt(2) g S_y``,
    ``dS_y/dt = -sqrt(2) g (N/2 - (Q^2 - 1)/2) Q``.
    """
    r = np.sqrt(2) * g

    def rhs(t, y):
        Q, Sy = y
        return [-r * Sy, -r * (N / 2 - (Q * Q - 1) / 2) * Q]

    grid = np.asarray(grid, float)
    ys, _ = _ode.integrate(rhs, [0.0, N / 2 * np.sin(phi)], grid, rtol=rtol, atol=atol)
    Q, Sy = ys[:, 0], ys[:, 1]
    d = np.diff(Sy)
    monotone = bool(np.all(d >= 0)) if Sy[0] >= 0 else bool(np.all(d <= 0))
    peak = None
    if not monotone and Sy[0] != 0:
        t, _, i = first_local_max(grid, Sy / Sy[0])
        peak = t if 0 < i < grid.size - 1 else None
    return SemiclassicalResult(grid, Q, Sy, monotone, peak)
