"""One-axis-twist amplification baseline.

The spins start in an x-polarized coherent state tipped out of the equator
by ``phi`` (``<S_z(0)> = N sin(phi)/2``) and evolve under

    d rho/dt = -i [chi S_z^2, rho] + Gamma_coll D[S_-] rho
               + gamma_rel sum_j D[sigma_-^j] rho + (gamma_phi/2) sum_j D[sigma_z^j] rho

The twist converts the ``S_z`` signal into ``S_y``.  Collective decay adds a
``phi``-independent ``S_y`` background, so the figure of merit is the
background-subtracted gain ``G_sub = (2/N) d<S_y>/dphi``.

For a detuned cavity mode with coupling ``g`` and loss ``kappa``:
``chi = g^2/Delta`` and ``Gamma_coll = chi kappa/Delta``.  Local rates are
quoted through the single-spin cooperativity ``eta_k = Gamma_0/gamma_k`` with
``Gamma_0 = 4 g^2/kappa`` the resonant collective rate, which does not
depend on the detuning.  In units of ``1/chi`` and with ``x = Delta/kappa``
this gives ``Gamma_coll/chi = 1/x`` and ``gamma_k/chi = 4 x/eta_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from . import _ode
from .dicke import coherent_spin_state
from .liouvillian import EnsembleParams, Trajectory, evolve_permutation_invariant
from .meanfield import CumulantTrajectory, _run
from .moments import PAIRS, SIGMA_MINUS, SIGMA_Z, MomentSystem, lowering, spin
from .sensing import GainCurve, observable

__all__ = [
    "OATParams",
    "oat_gain_ideal",
    "oat_ideal_sy",
    "oat_ideal_peak",
    "oat_qme",
    "oat_meanfield",
    "oat_background_subtracted_gain",
    "oat_gsub",
    "optimize_detuning",
    "OAT_MFT_NAMES",
    "SWEEP_COLUMNS",
]

OAT_MFT_NAMES = ("Sx", "Sy", "Sz") + tuple(
    "C" + "xyz"[a] + "xyz"[b] for a, b in PAIRS)

SWEEP_COLUMNS = ("N", "chi", "Gamma_coll", "gamma_phi", "gamma_rel", "Delta", "eta",
                 "tau1", "G_sub", "G_ideal", "ratio")


@dataclass(frozen=True)
class OATParams:
    """Twist strength, collective decay and local rates (all rates).

    ``Delta`` and ``kappa`` are only needed to quote cooperativities.
    """

    N: int
    chi: float
    Gamma_coll: float = 0.0
    gamma_rel: float = 0.0
    gamma_phi: float = 0.0
    Delta: float = float("nan")
    kappa: float = float("nan")

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if self.chi <= 0:
            raise ValueError("chi must be positive")
        for name in ("Gamma_coll", "gamma_rel", "gamma_phi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def from_cavity(cls, N, g, kappa, Delta, eta_phi=math.inf, eta_rel=math.inf):
        """Parameters of a detuned cavity with given single-spin cooperativities."""
        if g <= 0 or kappa <= 0 or Delta <= 0:
            raise ValueError("g, kappa and Delta must be positive")
        for eta in (eta_phi, eta_rel):
            if not eta > 0:
                raise ValueError("cooperativities must be positive")
        chi = g * g / Delta
        gamma0 = 4 * g * g / kappa
        return cls(int(N), chi, chi * kappa / Delta,
                   gamma_rel=gamma0 / eta_rel, gamma_phi=gamma0 / eta_phi,
                   Delta=float(Delta), kappa=float(kappa))

    @property
    def gamma0(self) -> float:
        """``4 g^2/kappa = 4 chi Delta/kappa``."""
        return 4 * self.chi * self.Delta / self.kappa

    def _eta(self, rate):
        return math.inf if rate == 0 else self.gamma0 / rate

    @property
    def eta_phi(self) -> float:
        return self._eta(self.gamma_phi)

    @property
    def eta_rel(self) -> float:
        return self._eta(self.gamma_rel)

    def ensemble(self) -> EnsembleParams:
        return EnsembleParams(self.N, Gamma=self.Gamma_coll, gamma_rel=self.gamma_rel,
                              gamma_phi=self.gamma_phi)


def oat_ideal_sy(N, chi, phi, t) -> np.ndarray:
    """Closed-form ``<S_y(t)>`` without dissipation.

    For a product state ``<S_+(t)> = (N/2) sin(theta) (cos chi t + i cos(theta)
    sin chi t)^(N-1)`` with polar angle ``theta = pi/2 - phi``.
    """
    t = np.asarray(t, float)
    z = (np.cos(chi * t) + 1j * np.sin(phi) * np.sin(chi * t)) ** (N - 1)
    return 0.5 * N * np.cos(phi) * z.imag


def _ideal_gain(N, s):
    return (N - 1) * np.sin(s) * np.cos(s) ** (N - 2)


def oat_ideal_peak(N, chi=1.0):
    """``(t_max, G_max)`` of the dissipation-free gain.

    The first maximum of ``(N-1) sin(chi t) cos(chi t)^(N-2)`` sits at
    ``tan^2(chi t) = 1/(N-2)``.
    """
    if N < 3:
        raise ValueError("a gain peak needs N >= 3")
    s = math.atan(1 / math.sqrt(N - 2))
    return s / chi, float(_ideal_gain(N, s))


def oat_gain_ideal(chi, N, grid) -> GainCurve:
    """Dissipation-free ``G(t) = lim_{phi->0} <S_y(t)>/<S_z(0)>``.

    Equals ``(N-1) sin(chi t) cos(chi t)^(N-2)``, which is exact for every
    ``N``; the short-time slope is ``(N-1) chi``.
    """
    grid = np.asarray(grid, float)
    G = _ideal_gain(N, chi * grid)
    return GainCurve.from_samples(grid, G, lambda t: float(_ideal_gain(N, chi * t)),
                                  strict=True)


def _initial_state(N, phi):
    return coherent_spin_state(N, np.pi / 2 - phi, 0.0)


def oat_qme(p: OATParams, phi, grid, *, rtol=_ode.DEFAULT_RTOL,
            atol=_ode.DEFAULT_ATOL) -> Trajectory:
    """Exact evolution in the permutation-invariant basis."""
    return evolve_permutation_invariant(p.ensemble(), _initial_state(p.N, phi), grid,
                                        chi=p.chi, rtol=rtol, atol=atol)


@lru_cache(maxsize=64)
def _unit_term(N, term, closure):
    if term == "twist":
        return MomentSystem(N, hamiltonian=spin(2, 2), closure=closure)
    if term == "coll":
        return MomentSystem(N, collective=[(1.0, lowering())], closure=closure)
    if term == "rel":
        return MomentSystem(N, local=[(1.0, SIGMA_MINUS)], closure=closure)
    return MomentSystem(N, local=[(0.5, SIGMA_Z)], closure=closure)


def _moment_system(p: OATParams, closure="ordered") -> MomentSystem:
    rates = (("twist", p.chi), ("coll", p.Gamma_coll), ("rel", p.gamma_rel),
             ("phi", p.gamma_phi))
    return MomentSystem.combine((r, _unit_term(p.N, k, closure)) for k, r in rates
                                if r or k == "twist")


def oat_meanfield(p: OATParams, phi, grid, *, rtol=1e-10, atol=1e-10,
                  closure="ordered") -> CumulantTrajectory:
    """Second-order cumulant evolution of the twist master equation.

    The closed equations are generated symbolically by
    :class:`~spinamp.moments.MomentSystem` (third cumulants set to zero) and
    start from the exact coherent-state moments, covariance
    ``(N/4)(1 - n n^T)``.  ``atol`` is relative to ``N``.
    """
    ms = _moment_system(p, closure)
    N = p.N
    n = np.array([np.cos(phi), 0.0, np.sin(phi)])
    y0 = MomentSystem.pack(0.5 * N * n, 0.25 * N * (np.eye(3) - np.outer(n, n)))
    return _run(ms.rhs, OAT_MFT_NAMES, y0, grid, N, rtol, atol * N)


def _sy_func(traj):
    if isinstance(traj, CumulantTrajectory):
        return (lambda t: float(traj.at(t, "Sy"))) if traj.sol is not None else None
    if traj.probe is not None:
        return lambda t: float(traj.probe(np.atleast_1d(t))["sy"][0])
    return None


def oat_background_subtracted_gain(traj_phi, traj_0, N, phi) -> GainCurve:
    """``G_sub(t) = [<S_y(t, phi)> - <S_y(t, 0)>] / (N phi/2)``.

    ``traj_0`` may also be the ``-phi`` run, in which case pass ``2 phi`` for a
    centered difference.  ``t_max`` of the result is ``tau_1``, the first strict
    local maximum.
    """
    if phi == 0:
        raise ValueError("phi must be nonzero")
    t1, t0 = np.asarray(traj_phi.times), np.asarray(traj_0.times)
    if t1.shape != t0.shape or np.any(t1 != t0):
        raise ValueError("trajectories must share a time grid")
    scale = 2.0 / (N * phi)
    G = (observable(traj_phi, "sy") - observable(traj_0, "sy")) * scale
    f1, f0 = _sy_func(traj_phi), _sy_func(traj_0)
    func = None
    if f1 is not None and f0 is not None:
        func = lambda t: (f1(t) - f0(t)) * scale
    return GainCurve.from_samples(t1, G, func, strict=True)


def oat_gsub(p: OATParams, grid, *, phi=1e-4, engine="meanfield", **kw) -> GainCurve:
    """Background-subtracted gain from a centered ``+-phi`` difference."""
    run = {"meanfield": oat_meanfield, "exact": oat_qme}[engine]
    plus, minus = run(p, phi, grid, **kw), run(p, -phi, grid, **kw)
    return oat_background_subtracted_gain(plus, minus, p.N, 2 * phi)


def _peak_grid(p: OATParams, span=3.0, points=400):
    # ideal first peak at chi t ~ 1/sqrt(N); an e^{-gamma t} envelope puts it
    # before min(t_ideal, 1/gamma) <= 2/(1/t_ideal + gamma)
    rate = p.chi * math.sqrt(p.N) + p.gamma_phi + p.gamma_rel
    return np.linspace(0.0, span / rate, points)


def optimize_detuning(template: OATParams, eta_k, N=None, *, kind="phi", g=1.0,
                      kappa=1.0, x_range=(1e-1, 1e6), scan_points=29, engine="meanfield",
                      phi=1e-4):
    """Detuning maximizing ``G_sub(tau_1)`` at fixed ``g``, ``kappa`` and ``eta_k``.

    ``template`` supplies ``N`` and the other cooperativity (via its rates,
    kept in units of ``4 g^2/kappa``).  The detuning ``Delta = x kappa`` is
    scanned on a log grid over ``x_range`` and refined by golden-section
    search in ``log x``.

    Returns
    -------
    (Delta_opt, G_sub_at_tau1, tau1, params_opt)
    """
    if not eta_k > 0:
        raise ValueError("eta_k must be positive")
    if kind not in ("phi", "rel"):
        raise ValueError("kind must be 'phi' or 'rel'")
    lo, hi = x_range
    if not (0 < lo < hi) or scan_points < 2:
        raise ValueError("empty detuning scan range")
    N = int(N if N is not None else template.N)
    other = template.eta_rel if kind == "phi" else template.eta_phi
    if not np.isfinite(template.gamma0):
        other = math.inf

    def build(x):
        kw = {"eta_phi": eta_k, "eta_rel": other} if kind == "phi" else \
             {"eta_rel": eta_k, "eta_phi": other}
        return OATParams.from_cavity(N, g, kappa, x * kappa, **kw)

    cache = {}

    def score(logx):
        key = round(float(logx), 12)
        if key not in cache:
            p = build(10 ** key)
            gc = oat_gsub(p, _peak_grid(p), phi=phi, engine=engine)
            cache[key] = (gc.G_max, gc.t_max, p)
        return cache[key]

    logs = np.linspace(np.log10(lo), np.log10(hi), scan_points)
    vals = np.array([score(s)[0] for s in logs])
    i = int(np.argmax(vals))
    best = logs[i]
    if 0 < i < len(logs) - 1:
        res = minimize_scalar(lambda s: -score(s)[0], bracket=(logs[i - 1], logs[i], logs[i + 1]),
                              method="golden", tol=1e-4)
        if -res.fun > vals[i] and logs[i - 1] <= res.x <= logs[i + 1]:
            best = float(res.x)
    G, tau1, p = score(best)
    return p.Delta, G, tau1, p
