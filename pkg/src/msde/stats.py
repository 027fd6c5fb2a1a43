"""Small statistical helpers shared across the experiment modules."""
from __future__ import annotations

import math

import numpy as np


def mean_and_se(samples: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error for i.i.d. draws."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n == 0:
        raise ValueError("mean_and_se needs at least one sample")
    mean = float(np.mean(samples))
    if n == 1:
        return mean, float("inf")
    se = float(np.std(samples, ddof=1) / math.sqrt(n))
    return mean, se


def batch_means_se(samples: np.ndarray, n_batches: int = 50) -> tuple[float, float]:
    """Mean and standard error for a correlated sequence via batch means.

    The sequence is split into ``n_batches`` contiguous batches; the spread
    of batch averages absorbs serial correlation that a plain i.i.d. formula
    would understate.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    n = samples.size
    if n < 2 * n_batches:
        return mean_and_se(samples)
    m = n // n_batches
    trimmed = samples[: m * n_batches].reshape(n_batches, m)
    bm = trimmed.mean(axis=1)
    mean = float(trimmed.mean())
    se = float(np.std(bm, ddof=1) / math.sqrt(n_batches))
    return mean, se


def loglog_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """OLS fit of log(y) against log(x): (slope, intercept, slope_se).

    The slope standard error comes from the residual variance; with two
    points it is reported as infinite rather than zero.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("loglog_fit expects two equal-length 1-d arrays")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValueError("loglog_fit requires strictly positive data")
    lx = np.log(x)
    ly = np.log(y)
    n = lx.size
    if n < 2:
        raise ValueError("loglog_fit needs at least two points")
    vx = lx - lx.mean()
    sxx = float(np.dot(vx, vx))
    if sxx == 0.0:
        raise ValueError("loglog_fit needs at least two distinct x values")
    slope = float(np.dot(vx, ly) / sxx)
    intercept = float(ly.mean() - slope * lx.mean())
    if n == 2:
        return slope, intercept, float("inf")
    resid = ly - (intercept + slope * lx)
    s2 = float(np.dot(resid, resid)) / (n - 2)
    return slope, intercept, math.sqrt(s2 / sxx)
