"""Small statistics helpers: power-law fits and jackknife errors."""

from __future__ import annotations

import math

import numpy as np

from .errors import NonPositive


def fit_exponent(x, y, yerr=None) -> tuple[float, float]:
    """Weighted least-squares slope of log y on log x and its standard error.

    Weights are inverse squared relative errors ``yerr / y`` (unit weights
    when ``yerr`` is omitted).  The standard error is scaled by the reduced
    chi-square, so an exact power law reports zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if len(x) < 3:
        raise ValueError("need at least 3 rows")
    if np.any(y <= 0) or np.any(x <= 0):
        raise NonPositive("power-law fit needs positive x and y")
    lx, ly = np.log(x), np.log(y)
    if yerr is None:
        w = np.ones_like(ly)
    else:
        rel = np.asarray(yerr, dtype=float) / y
        if np.any(rel <= 0) or not np.all(np.isfinite(rel)):
            raise NonPositive("relative errors must be positive and finite")
        w = 1.0 / rel**2
    W = w.sum()
    mx = (w @ lx) / W
    my = (w @ ly) / W
    sxx = w @ (lx - mx) ** 2
    if sxx == 0.0:
        raise ValueError("x values are all equal")
    slope = float((w @ ((lx - mx) * (ly - my))) / sxx)
    resid = ly - my - slope * (lx - mx)
    chi2 = float(w @ resid**2) / (len(x) - 2)
    return slope, math.sqrt(chi2 / sxx)


def jackknife_var_of_var(values) -> float:
    """Delete-one jackknife estimate of Var(sample variance)."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 3:
        return math.inf
    m = v.mean()
    dev2 = (v - m) ** 2
    S = dev2.sum()
    # leave-one-out variance in closed form: (S - n/(n-1) dev_i^2) / (n-2)
    loo = (S - n / (n - 1) * dev2) / (n - 2)
    return float((n - 1) / n * np.sum((loo - loo.mean()) ** 2))


def mean_and_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    mean = math.fsum(v) / v.size
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.inf
    return mean, se
