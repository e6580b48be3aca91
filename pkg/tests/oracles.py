"""Independent reference implementations used only by the tests.

They share no code with the package: plain Python loops and exact rationals.
"""
from fractions import Fraction
import math

import numpy as np


def brute_quantile(sample, theta):
    """inf{x : #{x_i <= x} / m >= theta}, scanning candidate x in sorted order."""
    t = Fraction(repr(float(theta)))
    xs = sorted(float(v) for v in sample)
    m = len(xs)
    for x in xs:
        if Fraction(sum(1 for v in xs if v <= x), m) >= t:
            return x
    return xs[-1]


def exact_quantile(sample, theta):
    """Order statistic k = ceil(m * theta), with the product taken in exact rationals."""
    xs = sorted(float(v) for v in sample)
    m = len(xs)
    prod = m * Fraction(repr(float(theta)))
    k = max(1, -(-prod.numerator // prod.denominator))
    return xs[min(k, m) - 1]


def check_loss(z, theta, xi):
    d = z - xi
    return (1.0 - theta) * -d if d < 0 else theta * d


def psi_loops(x, labels, theta, lam, quantiles):
    n, p = len(x), len(x[0])
    total = 0.0
    for j in range(p):
        for i in range(n):
            total += lam[j] * check_loss(x[i][j], theta[j], quantiles[labels[i]][j])
        total -= n * math.log(lam[j] * theta[j] * (1.0 - theta[j]))
    return total


def grid_psi(x, labels, k, step=0.01, lambda_cap=1e6):
    """Minimum of the objective over a theta grid, lambda in closed form, per variable summed."""
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    grid = [round(i * step, 10) for i in range(1, int(round(1 / step)))]
    total = 0.0
    for j in range(p):
        best = math.inf
        for t in grid:
            q = [exact_quantile(x[labels == c, j], t) for c in range(k)]
            loss = sum(check_loss(x[i, j], t, q[labels[i]]) for i in range(n))
            lam = min(n / loss, lambda_cap) if loss > 0 else lambda_cap
            best = min(best, lam * loss - n * math.log(lam * t * (1 - t)))
        total += best
    return total


def asymmetric_laplace(rng, size, lam, theta, q):
    """Draw from the density lam*theta*(1-theta)*exp(-lam*phi(x; theta, q))."""
    left = rng.random(size) < theta
    e = rng.exponential(size=size)
    return np.where(left, q - e / (lam * (1 - theta)), q + e / (lam * theta))


def al_loglik_grid(x, thetas, lams):
    """Profile log-likelihood maximiser over a (theta, lambda) grid, location at the sample quantile."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    best = (-math.inf, None, None)
    for t in thetas:
        q = x[max(0, math.ceil(n * t) - 1)]
        d = x - q
        loss = float(np.where(d < 0, (t - 1) * d, t * d).sum())
        for lam in lams:
            ll = n * math.log(lam * t * (1 - t)) - lam * loss
            if ll > best[0]:
                best = (ll, t, lam)
    return best[1], best[2]
