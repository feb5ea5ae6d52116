"""Scaling-law fits for gain and delay-time series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.optimize import curve_fit

__all__ = ["FitResult", "fit_scaling", "MODELS"]


def _log_over(N):
    return np.log(N) / N


def _logsqrt_over_sqrt(N):
    return np.log(np.sqrt(N)) / np.sqrt(N)


# label -> (basis function, description)
MODELS = {
    "sqrtN": (None, "c0 * N**p"),
    "logN-over-N": (_log_over, "a * ln(N)/N"),
    "logsqrtN-over-sqrtN": (_logsqrt_over_sqrt, "b * ln(sqrt N)/sqrt(N)"),
}


@dataclass(frozen=True)
class FitResult:
    """Fitted coefficients, their standard errors and relative residuals.

    ``residual`` is the RMS relative deviation ``(y - fit)/y`` (for the power
    law, the RMS of log residuals); ``max_residual`` its worst point.  For the
    power law ``c0_sqrt`` is the prefactor of ``sqrt(N)`` with the exponent
    held at 1/2 (the ``c0`` of ``G_max ~ c0 sqrt(N)``).
    """

    model: str
    coefficients: dict
    stderr: dict
    residual: float
    max_residual: float
    n_points: int
    c0_sqrt: float = float("nan")

    def predict(self, N):
        N = np.asarray(N, float)
        c = self.coefficients
        if self.model == "sqrtN":
            return c["c0"] * N ** c["p"]
        f = MODELS[self.model][0]
        return c["a"] * f(N)

    def to_dict(self) -> dict:
        return {"model": self.model, "coefficients": dict(self.coefficients),
                "stderr": dict(self.stderr), "residual": self.residual,
                "max_residual": self.max_residual, "n_points": self.n_points,
                "c0_sqrt": self.c0_sqrt if np.isfinite(self.c0_sqrt) else None}


def fit_scaling(N, y, model="sqrtN") -> FitResult:
    """Least-squares fit of ``y(N)``.

    ``sqrtN`` fits the power law ``c0 N^p`` by linear regression in log-log
    space.  The log-corrected forms fit one prefactor ``a`` (named ``a``
    for both) by least squares on the relative residual.

    Raises
    ------
    ValueError
        Unknown model, fewer than four points, non-positive ``N`` or ``y``,
        or a degenerate design (all ``N`` equal).
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {sorted(MODELS)}")
    N = np.asarray(N, float)
    y = np.asarray(y, float)
    if N.shape != y.shape or N.ndim != 1:
        raise ValueError("N and y must be 1-d arrays of equal length")
    if N.size < 4:
        raise ValueError("need at least 4 points")
    if np.any(N <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("N and y must be positive and finite")
    if np.ptp(N) == 0:
        raise ValueError("degenerate design: all N equal")

    if model == "sqrtN":
        r = stats.linregress(np.log(N), np.log(y))
        coef = {"c0": float(np.exp(r.intercept)), "p": float(r.slope)}
        err = {"c0": float(np.exp(r.intercept) * r.intercept_stderr),
               "p": float(r.stderr)}
        res = np.log(y) - (r.intercept + r.slope * np.log(N))
        c0_sqrt = float(np.exp(np.mean(np.log(y) - 0.5 * np.log(N))))
    else:
        f = MODELS[model][0](N)
        if np.any(f <= 0):
            raise ValueError("model basis vanishes on the given N (need N > 1)")
        popt, pcov = curve_fit(lambda n, a: a * MODELS[model][0](n), N, y,
                               p0=[float(np.median(y / f))], sigma=y)
        coef = {"a": float(popt[0])}
        err = {"a": float(np.sqrt(pcov[0, 0]))}
        res = (y - popt[0] * f) / y
        c0_sqrt = float("nan")
    rms = float(np.sqrt(np.mean(res ** 2)))
    if not np.isfinite(rms):
        raise ValueError("non-finite residual")
    return FitResult(model, coef, err, rms, float(np.max(np.abs(res))), int(N.size),
                     c0_sqrt)
