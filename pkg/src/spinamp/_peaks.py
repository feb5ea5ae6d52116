"""First-maximum search on sampled curves with optional continuous refinement."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar


def first_local_max(times, values, func=None, strict=False):
    """Locate the first local maximum of a sampled curve.

    A curve that starts by decreasing peaks at its first sample.  Otherwise
    the first interior sample that is not below its left neighbour and is
    strictly above its right neighbour brackets the peak; plateaus resolve to
    their earliest sample.  With ``strict`` the left comparison is strict as
    well.  When ``func`` (a continuous version of the curve) is given the
    bracket is refined by golden-section search.

    Returns
    -------
    (t_peak, value_peak, index)
        ``index`` is the bracketing sample, ``0`` if the curve starts by
        decreasing and ``len - 1`` if no interior maximum exists.
    """
    t = np.asarray(times, float)
    y = np.asarray(values, float)
    if t.size == 0:
        raise ValueError("empty curve")
    if t.size == 1:
        return float(t[0]), float(y[0]), 0
    if y[1] < y[0]:
        # decreasing from the start: the first maximum is the initial point
        return float(t[0]), float(y[0]), 0
    left_ok = (y[1:-1] > y[:-2]) if strict else (y[1:-1] >= y[:-2])
    peaks = np.nonzero(left_ok & (y[1:-1] > y[2:]))[0] + 1
    if peaks.size == 0:
        i = t.size - 1
        return float(t[i]), float(y[i]), i
    i = int(peaks[0])
    if not strict:
        # walk back over a plateau to its first sample
        while i > 0 and y[i - 1] == y[i]:
            i -= 1
    tp, yp = float(t[i]), float(y[i])
    if func is not None and 0 < i < t.size - 1:
        a, c = t[i - 1], t[i + 1]
        try:
            res = minimize_scalar(lambda s: -float(func(s)), bracket=(a, tp, c),
                                  method="golden", tol=1e-10)
            if a <= res.x <= c and -res.fun > yp:
                tp, yp = float(res.x), float(-res.fun)
        except ValueError:
            pass
    return tp, yp, i
