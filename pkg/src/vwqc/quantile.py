"""Empirical quantiles and the asymmetric absolute-deviation kernel.

All quantiles use the left-continuous inverse of the empirical cdf,
``inf{x : F_m(x) >= theta}``, i.e. the order statistic ``x_(k)`` with ``k``
the smallest integer such that ``k / m >= theta``.  There is no interpolation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DiscrepancyParams:
    """Percentage ``theta`` and location ``xi`` of one discrepancy term."""

    theta: float
    xi: float

    def __post_init__(self):
        _check_theta(self.theta)
        if not np.isfinite(self.xi):
            raise ValueError(f"xi must be finite, got {self.xi!r}")


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if not np.all((theta > 0.0) & (theta < 1.0)):
        raise ValueError("theta must lie strictly inside (0, 1)")


def quantile_index(m, theta):
    """0-based index of the empirical ``theta``-quantile in a sorted sample of size ``m``.

    Works elementwise on arrays.  The candidate ``ceil(m * theta)`` can be off
    by one when ``m * theta`` rounds across an integer, so it is corrected
    against the exactly rounded cdf values ``k / m``.
    """
    m = np.asarray(m, dtype=np.int64)
    theta = np.asarray(theta, dtype=float)
    k = np.ceil(m * theta).astype(np.int64)
    k = np.clip(k, 1, m)
    k = np.where((k > 1) & ((k - 1) / m >= theta), k - 1, k)
    k = np.where((k < m) & (k / m < theta), k + 1, k)
    return k - 1


def empirical_quantile(sorted_sample, theta):
    """Return the ``theta``-quantile of an already sorted sample."""
    x = np.asarray(sorted_sample, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("empirical_quantile needs a non-empty 1-d sample")
    _check_theta(theta)
    return float(x[int(quantile_index(x.size, theta))])


def discrepancy(z, theta, xi):
    """Vectorised check loss: ``(1 - theta)(xi - z)`` left of ``xi``, ``theta (z - xi)`` right of it.

    Exactly zero when ``z == xi`` on either branch.
    """
    z = np.asarray(z, dtype=float)
    diff = z - xi
    return np.where(diff < 0, (theta - 1.0) * diff, theta * diff)


def phi(z, params: DiscrepancyParams) -> float:
    """Quantile discrepancy of a single value ``z`` from ``params.xi``."""
    return float(discrepancy(z, params.theta, params.xi))


def variability(sample, theta, xi) -> float:
    """Total asymmetric deviation of ``sample`` around ``xi``.

    Minimised over ``xi`` by the empirical ``theta``-quantile.
    """
    x = np.asarray(sample, dtype=float)
    if x.size == 0:
        raise ValueError("variability of an empty sample is undefined")
    _check_theta(theta)
    above = x[x > xi] - xi
    below = xi - x[x < xi]
    return float(theta * above.sum() + (1.0 - theta) * below.sum())
