"""Least-squares rate fits on log-log data."""

from typing import Sequence

import numpy as np

from bukhgeim.errors import SweepError


def loglog_slope(x: Sequence[float], y: Sequence[float], drop_first: bool = True) -> float:
    """
    Slope of the least-squares line through (log x, log y).

    The smallest-x point is dropped by default (pre-asymptotic). Points with
    y <= 0 are ignored; fewer than two usable points raise SweepError.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    if drop_first:
        x, y = x[1:], y[1:]
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise SweepError("a rate fit needs at least two positive points")
    slope, _ = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope)
