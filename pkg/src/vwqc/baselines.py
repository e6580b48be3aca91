"""Quantile-family baselines: median, centroid and the single-theta quantile classifier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, QuantileModel
from .errors import DataError, DimensionError
from .estimator import predict as vwqc_predict
from .quantile import discrepancy, quantile_index

DEFAULT_THETA_GRID = tuple(np.round(np.arange(1, 50) * 0.02, 10))


def _class_blocks(dataset: Dataset):
    dataset.require_nonempty_classes()
    return [np.sort(dataset.values[dataset.labels == k], axis=0) for k in range(dataset.class_count)]


def class_quantiles(dataset: Dataset, theta) -> np.ndarray:
    """K x p matrix of within-class empirical quantiles at a common ``theta``."""
    blocks = _class_blocks(dataset)
    cols = np.arange(dataset.p)
    return np.vstack([b[quantile_index(b.shape[0], np.full(dataset.p, theta)), cols] for b in blocks])


def _check_obs(z, p):
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != p:
        raise DimensionError(f"expected {p} variables, got {z.shape[1]}")
    return z


def fit_median(dataset: Dataset) -> np.ndarray:
    """Class-wise medians (the 0.5 empirical quantile, lower median for even sizes)."""
    return class_quantiles(dataset, 0.5)


def fit_centroid(dataset: Dataset) -> np.ndarray:
    dataset.require_nonempty_classes()
    return np.vstack([dataset.values[dataset.labels == k].mean(axis=0)
                      for k in range(dataset.class_count)])


def predict_median(medians, observations) -> np.ndarray:
    """Nearest class median in L1 distance, scored as ``sum_j 0.5 |z_j - m_kj|``."""
    medians = np.atleast_2d(medians)
    z = _check_obs(observations, medians.shape[1])
    scores = np.stack([discrepancy(z, 0.5, m).sum(axis=1) for m in medians], axis=1)
    return np.argmin(scores, axis=1)


def predict_centroid(centroids, observations) -> np.ndarray:
    centroids = np.atleast_2d(centroids)
    z = _check_obs(observations, centroids.shape[1])
    d2 = np.stack([((z - c) ** 2).sum(axis=1) for c in centroids], axis=1)
    return np.argmin(d2, axis=1)


def median_as_vwqc(dataset: Dataset) -> QuantileModel:
    """The median classifier written as a VWQC model with theta = 0.5 and lambda = 1."""
    med = fit_median(dataset)
    p = dataset.p
    return QuantileModel(theta=np.full(p, 0.5), lambda_=np.ones(p), quantiles=med,
                         class_count=dataset.class_count, lambda_cap=1.0,
                         class_labels=dataset.class_labels)


# -- skewness used to orient variables ------------------------------------------------

def galton_skewness(x) -> float:
    """Quartile skewness ``(Q3 + Q1 - 2 Q2) / (Q3 - Q1)``; 0 when the quartiles coincide."""
    q1, q2, q3 = np.quantile(np.asarray(x, dtype=float), [0.25, 0.5, 0.75])
    if q3 == q1:
        return 0.0
    return float((q3 + q1 - 2.0 * q2) / (q3 - q1))


def moment_skewness(x) -> float:
    """Sample third standardised moment (biased); 0 for a constant sample."""
    x = np.asarray(x, dtype=float)
    d = x - x.mean()
    m2 = (d ** 2).mean()
    if m2 <= 0:
        return 0.0
    return float((d ** 3).mean() / m2 ** 1.5)


SKEWNESS = {"galton": galton_skewness, "moment": moment_skewness}


def skew_flip_signs(dataset: Dataset, skewness: str = "galton") -> np.ndarray:
    """+1/-1 per variable so that the class-averaged skewness is non-negative."""
    measure = SKEWNESS[skewness]
    dataset.require_nonempty_classes()
    signs = np.ones(dataset.p)
    for j in range(dataset.p):
        col = dataset.values[:, j]
        avg = np.mean([measure(col[dataset.labels == k]) for k in range(dataset.class_count)])
        if avg < 0:
            signs[j] = -1.0
    return signs


@dataclass(frozen=True)
class OqcModel:
    theta_star: float
    flip_signs: np.ndarray
    quantiles: np.ndarray
    theta_grid: tuple
    skewness: str = "galton"
    training_accuracy: float = float("nan")

    def __post_init__(self):
        if not 0 < self.theta_star < 1:
            raise DataError("theta_star must lie in (0, 1)")
        if not np.all(np.isin(self.flip_signs, (-1.0, 1.0))):
            raise DataError("flip_signs entries must be +1 or -1")

    @property
    def p(self) -> int:
        return self.quantiles.shape[1]


def _oqc_scores(z, theta, quantiles):
    return np.stack([discrepancy(z, theta, q).sum(axis=1) for q in quantiles], axis=1)


def fit_oqc(dataset: Dataset, theta_grid=DEFAULT_THETA_GRID, skewness: str = "galton") -> OqcModel:
    """Single-theta quantile classifier with skew orientation.

    Every variable is first multiplied by -1 when its class-averaged skewness is
    negative.  ``theta`` is then the grid value with the best training accuracy;
    ties go to the value closest to 0.5, then to the smaller value.
    """
    if dataset.class_count < 2:
        raise DataError("the quantile classifier needs at least two classes")
    grid = tuple(float(t) for t in theta_grid)
    if not grid or not all(0 < t < 1 for t in grid):
        raise DataError("theta_grid values must lie in (0, 1)")
    signs = skew_flip_signs(dataset, skewness)
    flipped = dataset.with_values(dataset.values * signs)
    blocks = _class_blocks(flipped)
    cols = np.arange(flipped.p)

    best_key, best = None, None
    for theta in grid:
        q = np.vstack([b[quantile_index(b.shape[0], np.full(flipped.p, theta)), cols] for b in blocks])
        pred = np.argmin(_oqc_scores(flipped.values, theta, q), axis=1)
        acc = float(np.mean(pred == flipped.labels))
        key = (-acc, round(abs(theta - 0.5), 12), theta)
        if best_key is None or key < best_key:
            best_key, best = key, (theta, q, acc)
    theta, q, acc = best
    return OqcModel(theta_star=theta, flip_signs=signs, quantiles=q, theta_grid=grid,
                    skewness=skewness, training_accuracy=acc)


def predict_oqc(model: OqcModel, observations) -> np.ndarray:
    z = _check_obs(observations, model.p) * model.flip_signs
    return np.argmin(_oqc_scores(z, model.theta_star, model.quantiles), axis=1)


class MedianClassifier:
    name = "median"

    def fit(self, dataset: Dataset) -> "MedianClassifier":
        self.medians_ = fit_median(dataset)
        return self

    def predict(self, observations) -> np.ndarray:
        return predict_median(self.medians_, observations)


class CentroidClassifier:
    name = "centroid"

    def fit(self, dataset: Dataset) -> "CentroidClassifier":
        self.centroids_ = fit_centroid(dataset)
        return self

    def predict(self, observations) -> np.ndarray:
        return predict_centroid(self.centroids_, observations)


class QuantileClassifier:
    name = "oqc"

    def __init__(self, theta_grid=DEFAULT_THETA_GRID, skewness: str = "galton"):
        self.theta_grid = theta_grid
        self.skewness = skewness

    def fit(self, dataset: Dataset) -> "QuantileClassifier":
        self.model_ = fit_oqc(dataset, self.theta_grid, self.skewness)
        return self

    def predict(self, observations) -> np.ndarray:
        return predict_oqc(self.model_, observations)


def pinned_median_predict(dataset: Dataset, observations) -> np.ndarray:
    """Median classifier predictions routed through the VWQC scoring path."""
    return vwqc_predict(median_as_vwqc(dataset), observations)
