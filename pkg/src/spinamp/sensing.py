"""Metrology layer: gain extraction, added noise, readout noise, error budget.

The estimation error of a Ramsey-type measurement splits into an intrinsic
(spin-projection) part and a detection part.  For fluorescence readout with
Poissonian photon counts of mean ``n_b`` (bright) and ``n_d`` (dark) per spin
the detection part is ``Xi_det^2 / N`` per unit transduction with
``Xi_det^2 = 1/(C^2 n_avg)``.  Amplifying the signal by ``G`` before readout
divides the detection part by ``G^2``, at the cost of added noise
``sigma2_add`` in the projection part.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from ._peaks import first_local_max

__all__ = [
    "GainCurve",
    "ReadoutModel",
    "ReadoutMoments",
    "SensitivityReport",
    "DisorderFactor",
    "gain_curve",
    "added_noise",
    "heuristic_added_noise_bound",
    "estimation_error",
    "amplified_error",
    "readout_moments",
    "wineland_parameter",
    "coupling_disorder_factor",
    "observable",
]


def observable(traj, key: str) -> np.ndarray:
    """Read ``sy``/``var_sy``-style series from either trajectory type."""
    if hasattr(traj, key):
        return np.asarray(getattr(traj, key))
    alias = {"sx": "Sx", "sy": "Sy", "sz": "Sz", "var_sx": "Cxx", "var_sy": "Cyy",
             "var_sz": "Czz", "c_yz": "Cyz"}
    return np.asarray(traj[alias[key]])


def _continuous(traj, key: str) -> Optional[Callable]:
    """Dense-output interpolant of ``sx``/``sy``/``sz`` when available."""
    probe = getattr(traj, "probe", None)
    if probe is not None:
        return lambda t: float(probe(np.atleast_1d(t))[key][0])
    name = key.capitalize()
    if getattr(traj, "sol", None) is not None and name in getattr(traj, "names", ()):
        return lambda t: float(traj.at(t, name))
    return None


@dataclass(frozen=True)
class GainCurve:
    """Sampled gain ``G(t)``, rate ``lambda = d ln G/dt`` and its first peak."""

    times: np.ndarray
    G: np.ndarray
    lam: np.ndarray
    t_max: float
    G_max: float

    @classmethod
    def from_samples(cls, times, G, func=None, strict=False) -> "GainCurve":
        times = np.asarray(times, float)
        G = np.asarray(G, float)
        if times.size > 1:
            with np.errstate(divide="ignore", invalid="ignore"):
                lam = np.gradient(G, times) / G
        else:
            lam = np.zeros_like(G)
        t_max, G_max, _ = first_local_max(times, G, func, strict=strict)
        return cls(times, G, lam, t_max, G_max)


def gain_curve(traj_plus, traj_minus, phi=None) -> GainCurve:
    """Two-sided gain ``[S_y(t)_+ - S_y(t)_-] / [S_y(0)_+ - S_y(0)_-]``.

    ``phi`` is informational; the normalization uses the sampled initial
    values.  The peak is refined on dense output when the trajectories carry
    it.

    Raises
    ------
    ValueError
        If grids differ or the initial difference vanishes (``phi = 0``).
    """
    tp, tm = np.asarray(traj_plus.times), np.asarray(traj_minus.times)
    if tp.shape != tm.shape or np.any(tp != tm):
        raise ValueError("trajectories must share a time grid")
    sp_, sm_ = observable(traj_plus, "sy"), observable(traj_minus, "sy")
    den = sp_[0] - sm_[0]
    if den == 0 or (phi is not None and phi == 0):
        raise ValueError("zero initial signal difference (phi = 0)")
    G = (sp_ - sm_) / den
    fp, fm = _continuous(traj_plus, "sy"), _continuous(traj_minus, "sy")
    func = None
    if fp is not None and fm is not None:
        func = lambda t: (fp(t) - fm(t)) / den
    return GainCurve.from_samples(tp, G, func)


def _value_at(traj, key, t):
    probe = getattr(traj, "probe", None)
    if probe is not None:
        m = probe(np.atleast_1d(float(t)))
        if key == "var_sy":
            return float(m["sy2"][0] - m["sy"][0] ** 2)
        return float(m[key][0])
    if getattr(traj, "sol", None) is not None and key in ("sy", "var_sy"):
        name = {"sy": "Sy", "var_sy": "Cyy"}[key]
        if name == "Cyy" and "Cyy" not in traj.names:
            name = "Cxx"
        return float(traj.at(t, name))
    return float(np.interp(t, traj.times, observable(traj, key)))


def added_noise(traj, gc: GainCurve, N: int) -> float:
    """``sigma2_add = Var(S_y)(t_max) / (G_max^2 N/4) - 1``."""
    var = _value_at(traj, "var_sy", gc.t_max)
    return var / (gc.G_max ** 2 * N / 4) - 1


def heuristic_added_noise_bound(G, N) -> float:
    """Heuristic minimum added noise ``1 - 1/(G^2 N)`` (not a strict bound)."""
    if G <= 0:
        raise ValueError("G must be positive")
    return 1 - 1 / (G * G * N)


@dataclass(frozen=True)
class ReadoutModel:
    """Poissonian fluorescence readout with bright/dark photon means per spin."""

    n_b: float
    n_d: float

    def __post_init__(self):
        if not (self.n_b > self.n_d >= 0):
            raise ValueError("need n_b > n_d >= 0")

    @classmethod
    def from_contrast(cls, contrast, n_avg) -> "ReadoutModel":
        if not 0 < contrast <= 1 or n_avg <= 0:
            raise ValueError("need 0 < contrast <= 1 and n_avg > 0")
        return cls(n_avg * (1 + contrast), n_avg * (1 - contrast))

    @classmethod
    def from_xi(cls, xi_det, contrast=1.0) -> "ReadoutModel":
        """Model with ``1/sqrt(C^2 n_avg) = xi_det`` at the given contrast."""
        return cls.from_contrast(contrast, 1 / (contrast ** 2 * xi_det ** 2))

    @property
    def n_avg(self) -> float:
        return 0.5 * (self.n_b + self.n_d)

    @property
    def contrast(self) -> float:
        return (self.n_b - self.n_d) / (self.n_b + self.n_d)

    @property
    def xi2_det(self) -> float:
        return 1 / (self.contrast ** 2 * self.n_avg)


@dataclass(frozen=True)
class ReadoutMoments:
    """Mean count and the detector/projection split of its variance."""

    mean: float
    detector_var: float
    projection_var: float

    @property
    def variance(self) -> float:
        return self.detector_var + self.projection_var


def readout_moments(rm: ReadoutModel, N, sz, var_sz, bright="up") -> ReadoutMoments:
    """Photon-count statistics for a state with given ``<S_z>`` and variance.

    With the bright state along ``+z`` the mean is ``N n_avg (1 + 2 C <S_z>/N)``;
    the detector term is the Poisson variance (equal to the mean) and the
    projection term is ``(n_b - n_d)^2 Var(S_z)``.
    """
    if bright not in ("up", "down"):
        raise ValueError("bright must be 'up' or 'down'")
    s = 1.0 if bright == "up" else -1.0
    mean = N * rm.n_avg * (1 + 2 * s * rm.contrast * sz / N)
    return ReadoutMoments(mean, mean, (rm.n_b - rm.n_d) ** 2 * var_sz)


@dataclass(frozen=True)
class SensitivityReport:
    """Error budget of one readout; ``dphi2_total = dphi2_int + dphi2_det``."""

    N: int
    dphi2_int: float
    dphi2_det: float
    sigma2_add: float
    G: float = 1.0

    @property
    def dphi2_total(self) -> float:
        return self.dphi2_int + self.dphi2_det

    @property
    def sql(self) -> float:
        return 1.0 / self.N

    @property
    def ratio_to_sql(self) -> float:
        return self.dphi2_total / self.sql

    def to_dict(self, **extra) -> dict:
        d = {k: (float(v) if k != "N" else int(v)) for k, v in asdict(self).items()}
        d.update(dphi2_total=float(self.dphi2_total), sql=float(self.sql),
                 ratio_to_sql=float(self.ratio_to_sql))
        d.update(extra)
        return d

    def to_json(self, **extra) -> str:
        return json.dumps(self.to_dict(**extra), sort_keys=True)


def estimation_error(moments: dict, rm: ReadoutModel, transduction, N, *,
                     small_signal=True) -> SensitivityReport:
    """Error-propagation estimate for fluorescence readout of ``S_z``.

    ``moments`` holds ``sz`` and ``var_sz`` of the measured component and
    ``transduction`` is ``d<S_z>/dphi``.  For an amplified readout pass the
    post-amplification values (``S_y`` after the final pi/2 pulse) with
    ``transduction = G N/2``; the detection term then equals the unamplified
    one divided by ``G^2``.  ``small_signal`` drops the ``2 C <S_z>/N``
    correction, which is of order ``phi``.
    """
    if transduction == 0:
        raise ValueError("zero transduction")
    a2 = float(abs(transduction)) ** 2
    corr = 0.0 if small_signal else 2 * rm.contrast * moments["sz"] / N
    det = N / 4 * (1 + corr) * rm.xi2_det / a2
    intr = moments["var_sz"] / a2
    G = 2 * abs(transduction) / N
    return SensitivityReport(int(N), intr, det, N * intr - 1, G)


def amplified_error(N, xi2_det, sigma2_add, G):
    """``(1/N) [1 + sigma2_add + xi2_det / G^2]``."""
    N = np.asarray(N, float)
    return (1 + sigma2_add + xi2_det / np.asarray(G, float) ** 2) / N


def wineland_parameter(mean, cov, N) -> float:
    """``xi_R^2 = N min_perp Var(S_perp) / |<S>|^2``.

    ``mean`` is the mean spin vector, ``cov`` the symmetrized 3x3
    covariance; the minimum over directions orthogonal to the mean spin is
    the smaller eigenvalue of the projected 2x2 covariance.
    """
    mean = np.asarray(mean, float)
    cov = np.asarray(cov, float)
    length = np.linalg.norm(mean)
    if length == 0:
        raise ValueError("zero mean-spin length")
    n = mean / length
    # orthonormal complement of n
    basis = np.linalg.svd(np.eye(3) - np.outer(n, n))[0][:, :2]
    perp = basis.T @ cov @ basis
    lo = np.linalg.eigvalsh(0.5 * (perp + perp.T))[0]
    return float(N * lo / length ** 2)


@dataclass(frozen=True)
class DisorderFactor:
    """Effective collective parameters for non-uniform couplings."""

    mu: float
    gamma0: float
    G_ci: float
    t_max_ci: float


def coupling_disorder_factor(g, kappa) -> DisorderFactor:
    """Reduction of the collective spin length by coupling disorder.

    ``mu = (1/N) sum_{k != l} g_k g_l / sum_k g_k^2``,
    ``gamma0 = sum_k 4 g_k^2 / (kappa N)``, ``G_ci = sqrt(mu N)/2`` and
    ``t_max_ci = ln(mu N) / (gamma0 mu N)`` (``nan`` when ``mu N <= 1``).
    """
    g = np.asarray(g, float)
    if g.ndim != 1 or g.size == 0 or np.any(g < 0):
        raise ValueError("couplings must be a non-empty list of non-negative values")
    s2 = float(np.sum(g * g))
    if s2 == 0:
        raise ValueError("all couplings are zero")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    N = g.size
    cross = float(np.sum(g)) ** 2 - s2
    mu = cross / (N * s2)
    gamma0 = 4 * s2 / (kappa * N)
    muN = mu * N
    G_ci = math.sqrt(max(muN, 0.0)) / 2
    t_ci = math.log(muN) / (gamma0 * muN) if muN > 1 else float("nan")
    return DisorderFactor(mu, gamma0, G_ci, t_ci)
