"""Thin wrapper around scipy's embedded Runge-Kutta integrators."""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12


def integrate(fun, y0, grid, *, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
              dense=False, method="DOP853", max_step=np.inf):
    """Integrate ``dy/dt = fun(t, y)`` and sample on ``grid``.

    Returns
    -------
    ys : ndarray, shape (len(grid), len(y0))
    sol : OdeSolution or None
        Continuous interpolant when ``dense`` is set.
    """
    grid = np.asarray(grid, dtype=float)
    y0 = np.asarray(y0)
    if grid.size == 1 or grid[-1] == grid[0]:
        return np.repeat(y0[None, :], grid.size, axis=0), None
    res = solve_ivp(fun, (grid[0], grid[-1]), y0, method=method, t_eval=grid,
                    rtol=rtol, atol=atol, dense_output=dense, max_step=max_step)
    if res.status < 0:
        raise IntegrationError(f"{method} failed: {res.message}")
    return res.y.T, res.sol


def integrate_linear(L, y0, grid, **kw):
    """Integrate the autonomous linear system ``dy/dt = L @ y``."""
    return integrate(lambda t, y: L @ y, y0, grid, **kw)
