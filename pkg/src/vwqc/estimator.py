"""Variable-wise quantile classifier.

Each variable ``j`` gets its own percentage ``theta[j]`` and scale
``lambda_[j]``.  They are estimated by minimising

    Psi = sum_i sum_j lambda_j * phi(x_ij; theta_j, q_{c_i j}(theta_j))
          - n * sum_j log(lambda_j * theta_j * (1 - theta_j))

which is the negative asymmetric-Laplace log-likelihood with class-wise
locations.  Each sweep updates theta, then the class quantiles at the new
theta, then lambda in closed form, and never raises ``Psi``.

Two theta steps are available.  ``"local"`` takes the root of the quadratic
obtained with quantiles and lambda held fixed.  It stalls easily because the
objective is a sawtooth in theta.  ``"profile"`` (the default) minimises the
objective over theta with the quantiles and lambda following theta, which is
exact because the quantiles are constant between the jump points ``i / m_k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .dataset import Dataset, QuantileModel, pooled_within_class_sd
from .errors import DataError, DimensionError
from .quantile import discrepancy, quantile_index


@dataclass(frozen=True)
class FitConfig:
    lambda_cap: float = 1e6
    theta_floor: float = 0.01
    tol: float = 1e-8
    max_sweeps: int = 200
    restarts: int = 5
    seed: Optional[int] = 0
    theta_step: str = "profile"

    def __post_init__(self):
        if self.theta_step not in ("profile", "local"):
            raise ValueError("theta_step must be 'profile' or 'local'")
        if not 0.0 < self.theta_floor < 0.5:
            raise ValueError("theta_floor must lie in (0, 0.5)")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if not (self.lambda_cap > 0 and math.isfinite(self.lambda_cap)):
            raise ValueError("lambda_cap must be positive and finite")


@dataclass
class FitReport:
    final_psi: float
    sweeps_used: int
    restart_index: int
    converged: bool
    psi_trace: list
    restart_traces: list = field(default_factory=list)
    restart_psi: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "final_psi": self.final_psi,
            "sweeps_used": self.sweeps_used,
            "restart_index": self.restart_index,
            "converged": self.converged,
            "psi_trace": list(self.psi_trace),
            "restart_psi": list(self.restart_psi),
        }


def _check_dims(dataset, theta, lam, quantiles):
    theta = np.asarray(theta, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float).ravel()
    q = np.asarray(quantiles, dtype=float)
    if q.ndim == 1:
        q = q.reshape(1, -1)
    p = dataset.p
    if theta.size != p or lam.size != p or q.shape != (dataset.class_count, p):
        raise DimensionError(
            f"expected theta/lambda of length {p} and quantiles {dataset.class_count}x{p}, got "
            f"{theta.shape}, {lam.shape}, {q.shape}")
    return theta, lam, q


def psi(dataset: Dataset, theta, lam, quantiles) -> float:
    """Evaluate the objective at ``(theta, lambda, quantiles)``."""
    theta, lam, q = _check_dims(dataset, theta, lam, quantiles)
    loss = discrepancy(dataset.values, theta, q[dataset.labels]).sum(axis=0)
    return float((lam * loss).sum() - dataset.n * np.log(lam * theta * (1.0 - theta)).sum())


def _theta_root(a, n, theta_floor):
    """Root in (0, 1) of ``a t^2 - (a + 2n) t + n = 0`` with ``a = lambda * S``.

    Written in a cancellation-free form of ``(a + 2n - sqrt(a^2 + 4n^2)) / (2a)``;
    equals 1/2 at ``a = 0``.
    """
    a = np.asarray(a, dtype=float)
    two_n = 2.0 * n
    r = np.hypot(a, two_n)
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = two_n / (a + two_n + r)
        neg = (r - a) / (r - a + two_n)
    theta = np.where(a >= 0, pos, neg)
    return np.clip(theta, theta_floor, 1.0 - theta_floor)


def _lambda_closed_form(loss, n, lambda_cap):
    loss = np.asarray(loss, dtype=float)
    with np.errstate(divide="ignore"):
        lam = np.where(loss > 0, n / np.where(loss > 0, loss, 1.0), np.inf)
    return np.minimum(lam, lambda_cap)


def update_lambda(dataset: Dataset, j: int, theta_j: float, quantiles_j, lambda_cap: float) -> float:
    """Closed-form scale for variable ``j``: ``min(n / sum_i phi, lambda_cap)``.

    ``quantiles_j`` holds the K class quantiles of variable ``j`` at ``theta_j``.
    A zero total discrepancy gives ``lambda_cap``.
    """
    q = np.asarray(quantiles_j, dtype=float).ravel()
    loss = discrepancy(dataset.values[:, j], theta_j, q[dataset.labels]).sum()
    return float(_lambda_closed_form(loss, dataset.n, lambda_cap))


def update_theta(dataset: Dataset, j: int, lambda_j: float, quantiles_j,
                 theta_floor: float = 0.01) -> float:
    """Percentage for variable ``j`` minimising the objective with locations held fixed.

    With ``S = sum_i (x_ij - q_{c_i j})`` this is the root of
    ``lambda S t^2 - (2n + lambda S) t + n = 0`` lying in (0, 1), clamped to
    ``[theta_floor, 1 - theta_floor]``.
    """
    q = np.asarray(quantiles_j, dtype=float).ravel()
    s = (dataset.values[:, j] - q[dataset.labels]).sum()
    return float(_theta_root(lambda_j * s, dataset.n, theta_floor))


class _SortedClasses:
    """Per-class column-sorted data with prefix sums for O(1) quantile lookups.

    The class quantiles are piecewise constant in theta.  They only change at
    the points ``i / m_k``, so all variables share the same partition of (0, 1)
    into intervals on which every class quantile is fixed.
    """

    def __init__(self, dataset: Dataset):
        self.p = dataset.p
        self.blocks = [np.sort(dataset.values[dataset.labels == k], axis=0)
                       for k in range(dataset.class_count)]
        self.sizes = [b.shape[0] for b in self.blocks]
        self._cols = np.arange(self.p)
        self._prefix = None

    def quantiles(self, theta):
        out = np.empty((len(self.blocks), self.p))
        for k, block in enumerate(self.blocks):
            out[k] = block[quantile_index(self.sizes[k], theta), self._cols]
        return out

    def _build_intervals(self):
        edges = np.unique(np.concatenate([np.arange(1, m + 1) / m for m in self.sizes]))
        self.upper = edges
        self.lower = np.concatenate([[0.0], edges[:-1]])
        self._prefix = []
        for m, block in zip(self.sizes, self.blocks):
            idx = quantile_index(m, edges)
            csum = np.vstack([np.zeros((1, self.p)), np.cumsum(block, axis=0)])
            xi = block[idx]
            above = (csum[m] - csum[idx + 1]) - (m - idx - 1)[:, None] * xi
            below = idx[:, None] * xi - csum[idx]
            self._prefix.append((above, below))
        self.above = sum(a for a, _ in self._prefix)
        self.below = sum(b for _, b in self._prefix)

    def interval_sums(self):
        """Per interval and variable: total deviation above and below the class quantiles."""
        if self._prefix is None:
            self._build_intervals()
        return self.lower, self.upper, np.maximum(self.above, 0.0), np.maximum(self.below, 0.0)


def _objective_terms(x, labels, n, theta, lam, q):
    loss = discrepancy(x, theta, q[labels]).sum(axis=0)
    return loss, lam * loss - n * np.log(lam * theta * (1.0 - theta))


def _profiled_objective(theta, above, below, n, lambda_cap):
    """Objective of one variable with lambda at its closed-form optimum."""
    g = theta * above + (1.0 - theta) * below
    with np.errstate(divide="ignore", invalid="ignore"):
        free = n + n * np.log(g / n)
        capped = lambda_cap * g - n * np.log(lambda_cap)
        out = np.where(g * lambda_cap >= n, free, capped) - n * np.log(theta * (1.0 - theta))
    return np.where(np.isfinite(out), out, np.inf)


def _profile_theta(sorted_classes, n, theta_floor, lambda_cap):
    """Global minimiser over theta with the class quantiles and lambda following theta.

    On an interval where the class quantiles stay fixed, alternating the
    lambda and theta updates converges to ``sqrt(B) / (sqrt(A) + sqrt(B))``,
    with ``A`` and ``B`` the total deviation above and below the quantiles.
    Below ``G = n / lambda_cap`` lambda sits at the cap and the plain quadratic
    root applies instead.  Evaluating these candidates, the interval ends and
    the cap switch point on every interval gives the exact minimum.
    """
    lower, upper, above, below = sorted_classes.interval_sums()
    lo = np.maximum(lower, theta_floor)[:, None]
    hi = np.minimum(upper, 1.0 - theta_floor)[:, None]
    lo_b = np.broadcast_to(lo, above.shape)
    hi_b = np.broadcast_to(hi, above.shape)
    ra, rb = np.sqrt(above), np.sqrt(below)
    with np.errstate(divide="ignore", invalid="ignore"):
        free = np.where(ra + rb > 0, rb / (ra + rb), 0.5)
        switch = (n / lambda_cap - below) / (above - below)
    capped = _theta_root(lambda_cap * (above - below), n, theta_floor)
    switch = np.where(np.isfinite(switch), switch, lo_b)
    candidates = [np.clip(c, lo, hi) for c in (free, capped, switch)] + [lo_b, hi_b]
    best_theta = None
    best_obj = None
    for cand in candidates:
        obj = _profiled_objective(cand, above, below, n, lambda_cap)
        obj = np.where(lo_b <= hi_b, obj, np.inf)
        if best_obj is None:
            best_theta, best_obj = cand, obj
        else:
            better = obj < best_obj
            best_theta = np.where(better, cand, best_theta)
            best_obj = np.where(better, obj, best_obj)
    pick = np.argmin(best_obj, axis=0)
    return best_theta[pick, np.arange(best_theta.shape[1])]


def _single_restart(x, labels, n, sorted_classes, theta, config):
    lam = np.ones_like(theta)
    q = sorted_classes.quantiles(theta)
    loss, terms = _objective_terms(x, labels, n, theta, lam, q)
    current = float(terms.sum())
    trace = [current]
    converged = False
    for _ in range(config.max_sweeps):
        if config.theta_step == "profile":
            candidate = _profile_theta(sorted_classes, n, config.theta_floor, config.lambda_cap)
            q_new = sorted_classes.quantiles(candidate)
            loss_new = discrepancy(x, candidate, q_new[labels]).sum(axis=0)
            lam_new = _lambda_closed_form(loss_new, n, config.lambda_cap)
        else:
            q = sorted_classes.quantiles(theta)
            s = (x - q[labels]).sum(axis=0)
            candidate = _theta_root(lam * s, n, config.theta_floor)
            q_new = sorted_classes.quantiles(candidate)
            loss_new = discrepancy(x, candidate, q_new[labels]).sum(axis=0)
            lam_new = lam
        terms_new = lam_new * loss_new - n * np.log(lam_new * candidate * (1.0 - candidate))
        # the interval sums carry rounding error; never accept a worse theta
        keep = terms_new <= terms
        theta = np.where(keep, candidate, theta)
        q = np.where(keep, q_new, q)
        loss = np.where(keep, loss_new, loss)
        lam = _lambda_closed_form(loss, n, config.lambda_cap)
        terms = lam * loss - n * np.log(lam * theta * (1.0 - theta))
        new = float(terms.sum())
        trace.append(new)
        change = abs(current - new)
        current = new
        if change == 0.0 or change < config.tol * abs(trace[-2]):
            converged = True
            break
    return theta, lam, q, trace, converged


def fit(dataset: Dataset, config: FitConfig = FitConfig(), standardize: bool = False):
    """Estimate per-variable ``theta`` and ``lambda`` by alternating exact updates.

    Every restart draws ``theta`` uniformly from ``[theta_floor, 1 - theta_floor]``
    and starts at ``lambda = 1``.  The restart with the lowest final objective
    is kept (ties go to the earliest restart).

    With ``standardize=True`` every variable is first divided by its pooled
    within-class standard deviation; the divisors are stored in the model and
    applied again by :func:`predict`.

    Returns
    -------
    (QuantileModel, FitReport)
    """
    if dataset.p == 0:
        raise DataError("cannot fit a model with zero variables")
    dataset.require_nonempty_classes()
    divisors = None
    if standardize:
        divisors = pooled_within_class_sd(dataset)
        dataset = dataset.with_values(dataset.values / divisors)

    x, labels, n = dataset.values, dataset.labels, dataset.n
    sorted_classes = _SortedClasses(dataset)
    rng = np.random.default_rng(config.seed)
    best = None
    traces, finals = [], []
    for r in range(config.restarts):
        theta0 = rng.uniform(config.theta_floor, 1.0 - config.theta_floor, size=dataset.p)
        result = _single_restart(x, labels, n, sorted_classes, theta0, config)
        traces.append(result[3])
        finals.append(result[3][-1])
        if best is None or result[3][-1] < best[1][3][-1]:
            best = (r, result)

    r, (theta, lam, q, trace, converged) = best
    model = QuantileModel(
        theta=theta, lambda_=lam, quantiles=q, class_count=dataset.class_count,
        lambda_cap=config.lambda_cap, standardization=divisors,
        class_labels=dataset.class_labels, variable_names=dataset.variable_names,
    )
    report = FitReport(final_psi=trace[-1], sweeps_used=len(trace) - 1, restart_index=r,
                       converged=converged, psi_trace=trace, restart_traces=traces,
                       restart_psi=finals)
    return model, report


def _prepare(model: QuantileModel, observations):
    z = np.asarray(observations, dtype=float)
    if z.ndim == 1:
        z = z.reshape(1, -1)
    if z.ndim != 2 or z.shape[1] != model.p:
        raise DimensionError(f"model expects {model.p} variables, got array of shape {z.shape}")
    if model.standardization is not None:
        z = z / model.standardization
    return z


def decision_scores(model: QuantileModel, observations) -> np.ndarray:
    """Weighted discrepancy of each observation to each class, shape ``(n', K)``.

    For a single 1-d observation a length-K vector is returned.
    """
    single = np.ndim(observations) == 1
    z = _prepare(model, observations)
    scores = np.empty((z.shape[0], model.class_count))
    for k in range(model.class_count):
        scores[:, k] = (discrepancy(z, model.theta, model.quantiles[k]) * model.lambda_).sum(axis=1)
    return scores[0] if single else scores


def predict(model: QuantileModel, observations) -> np.ndarray:
    """Class index with the smallest weighted discrepancy; ties go to the lower index."""
    scores = decision_scores(model, np.atleast_2d(np.asarray(observations, dtype=float)))
    return np.argmin(scores, axis=1)


class VWQC:
    """Estimator wrapper with ``fit`` / ``predict`` used by the evaluation harness."""

    name = "vwqc"

    def __init__(self, config: FitConfig = FitConfig(), standardize: bool = False):
        self.config = config
        self.standardize = standardize
        self.model_ = None
        self.report_ = None

    def fit(self, dataset: Dataset) -> "VWQC":
        self.model_, self.report_ = fit(dataset, self.config, standardize=self.standardize)
        return self

    def predict(self, observations) -> np.ndarray:
        return predict(self.model_, observations)

    def with_seed(self, seed) -> "VWQC":
        return VWQC(replace(self.config, seed=seed), self.standardize)


def fit_asymmetric_laplace(sample, config: FitConfig = FitConfig()):
    """Maximum-likelihood ``(theta, lambda, location)`` of an asymmetric Laplace sample.

    Single-class, single-variable special case of :func:`fit`.
    """
    x = np.asarray(sample, dtype=float).ravel()
    ds = Dataset(x.reshape(-1, 1), np.zeros(x.size, dtype=np.int64), 1)
    model, report = fit(ds, config)
    return float(model.theta[0]), float(model.lambda_[0]), float(model.quantiles[0, 0]), report
