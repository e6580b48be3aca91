"""Scoring, cross-validation and the benchmark runner."""
from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .baselines import CentroidClassifier, MedianClassifier, QuantileClassifier
from .dataset import Dataset, pooled_within_class_sd
from .errors import DataError, FoldError
from .estimator import VWQC, FitConfig
from .simgen import derive_seed, generate

RESULT_COLUMNS = ("scenario", "kind", "n", "p", "relevant", "correlated",
                  "classifier", "replication", "rate", "fit_millis")


def misclassification_rate(predicted, truth) -> float:
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise DataError("predicted and truth lengths differ")
    if predicted.size == 0:
        raise DataError("cannot score an empty prediction vector")
    return float(np.mean(predicted != truth))


# -- classifier registry ------------------------------------------------------------

def make_classifier(name: str, seed: int = 0, fit_config: Optional[FitConfig] = None,
                    skewness: str = "galton"):
    """Build a fresh classifier by name: ``vwqc``, ``median``, ``centroid`` or ``oqc``."""
    if name == "vwqc":
        cfg = fit_config or FitConfig()
        return VWQC(replace(cfg, seed=seed))
    if name == "median":
        return MedianClassifier()
    if name == "centroid":
        return CentroidClassifier()
    if name == "oqc":
        return QuantileClassifier(skewness=skewness)
    raise ValueError(f"unknown classifier {name!r}")


CLASSIFIERS = ("vwqc", "median", "centroid", "oqc")


# -- cross-validation ---------------------------------------------------------------

@dataclass(frozen=True)
class CvSpec:
    folds: int = 10
    stratified: bool = True
    seed: int = 0
    standardize: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise FoldError("folds must be at least 2")


@dataclass
class CvResult:
    mean: float
    sd: float
    se: float
    fold_rates: list
    fold_divisors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd, "se": self.se, "fold_rates": list(self.fold_rates)}


def stratified_folds(labels, folds: int, seed: int, stratified: bool = True) -> np.ndarray:
    """Fold id per row.

    Rows are shuffled within each class and dealt round robin, with the dealing
    offset carried from one class to the next so fold sizes stay within one.
    """
    labels = np.asarray(labels)
    n = labels.size
    if folds > n:
        raise FoldError(f"{folds} folds requested for {n} rows")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    if not stratified:
        perm = rng.permutation(n)
        fold_of[perm] = np.arange(n) % folds
        return fold_of
    offset = 0
    for k in np.unique(labels):
        idx = np.flatnonzero(labels == k)
        idx = idx[rng.permutation(idx.size)]
        fold_of[idx] = (offset + np.arange(idx.size)) % folds
        offset = (offset + idx.size) % folds
    return fold_of


def _standardize_pair(train: Dataset, test_values):
    sd = pooled_within_class_sd(train)
    return train.with_values(train.values / sd), np.asarray(test_values) / sd, sd


def cross_validate(dataset: Dataset, classifier_factory: Callable, cv: CvSpec = CvSpec()) -> CvResult:
    """k-fold CV of ``classifier_factory()``; standardisation divisors come from training folds only."""
    dataset.require_nonempty_classes()
    fold_of = stratified_folds(dataset.labels, cv.folds, cv.seed, cv.stratified)
    rates, divisors = [], []
    for f in range(cv.folds):
        test = fold_of == f
        train = dataset.subset(np.flatnonzero(~test))
        if np.any(train.class_sizes() == 0):
            raise FoldError(f"fold {f} leaves a class without training rows")
        test_x = dataset.values[test]
        if cv.standardize:
            train, test_x, sd = _standardize_pair(train, test_x)
            divisors.append(sd)
        model = classifier_factory().fit(train)
        rates.append(misclassification_rate(model.predict(test_x), dataset.labels[test]))
    r = np.asarray(rates)
    sd = float(r.std(ddof=1)) if r.size > 1 else 0.0
    return CvResult(float(r.mean()), sd, sd / math.sqrt(r.size), rates, divisors)


def relative_performance(rates: dict, vwqc_key: str = "vwqc") -> dict:
    """``(rate_c - rate_vwqc) / mean rate``; NaN when the mean rate is zero."""
    if not rates:
        raise DataError("no rates supplied")
    if vwqc_key not in rates:
        raise DataError(f"rates lack the reference classifier {vwqc_key!r}")
    avg = float(np.mean(list(rates.values())))
    if avg <= 0:
        return {c: float("nan") for c in rates}
    base = rates[vwqc_key]
    return {c: (r - base) / avg for c, r in rates.items()}


# -- benchmark ----------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkRecord:
    scenario: str
    kind: str
    n: int
    p: int
    relevant: float
    correlated: bool
    classifier: str
    replication: int
    rate: float
    fit_millis: float
    error: str = ""

    def row(self) -> list:
        return [self.scenario, self.kind, self.n, self.p, self.relevant, int(self.correlated),
                self.classifier, self.replication, repr(self.rate), f"{self.fit_millis:.3f}"]


def _run_cell(args):
    spec, classifiers, replication, master_seed, fit_config, skewness = args
    seed = derive_seed(master_seed, spec.label, replication)
    records = []
    common = dict(scenario=spec.label, kind=spec.kind, n=spec.n, p=spec.p,
                  relevant=spec.relevant_fraction, correlated=spec.correlated,
                  replication=replication)
    try:
        train, test = generate(spec.with_seed(seed))
    except Exception as exc:  # noqa: BLE001 - recorded and the run continues
        return [BenchmarkRecord(classifier=c, rate=float("nan"), fit_millis=0.0,
                                error=f"{type(exc).__name__}: {exc}", **common) for c in classifiers]
    for name in classifiers:
        try:
            t0 = time.perf_counter()
            model = make_classifier(name, seed, fit_config, skewness).fit(train)
            millis = (time.perf_counter() - t0) * 1000.0
            rate = misclassification_rate(model.predict(test.values), test.labels)
            records.append(BenchmarkRecord(classifier=name, rate=rate, fit_millis=millis, **common))
        except Exception as exc:  # noqa: BLE001
            records.append(BenchmarkRecord(classifier=name, rate=float("nan"), fit_millis=0.0,
                                           error=f"{type(exc).__name__}: {exc}", **common))
    return records


def run_benchmark(grid, classifiers=CLASSIFIERS, replications: int = 20, seed: int = 0,
                  jobs: int = 1, fit_config: Optional[FitConfig] = None, skewness: str = "galton"):
    """Yield records cell by cell, replication by replication, in grid order.

    Each (cell, replication) draws its own seed from the master seed, so the
    output is identical for any ``jobs`` value.
    """
    grid = list(grid)
    if not grid:
        raise DataError("benchmark grid is empty")
    tasks = [(spec, tuple(classifiers), r, seed, fit_config, skewness)
             for spec in grid for r in range(replications)]
    if jobs <= 1:
        for t in tasks:
            yield from _run_cell(t)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for recs in pool.map(_run_cell, tasks):
            yield from recs


def default_jobs() -> int:
    if hasattr(os, "sched_getaffinity"):
        return max(1, len(os.sched_getaffinity(0)))
    return os.cpu_count() or 1


def summarize(records) -> list:
    """Mean, sd and se of the rate per (scenario, classifier), failed rows excluded."""
    groups = {}
    meta = {}
    for r in records:
        key = (r.scenario, r.classifier)
        meta.setdefault(key, r)
        if not r.error:
            groups.setdefault(key, []).append(r.rate)
    rows = []
    for key, first in meta.items():
        rates = np.asarray(groups.get(key, []), dtype=float)
        m = rates.size
        mean = float(rates.mean()) if m else float("nan")
        sd = float(rates.std(ddof=1)) if m > 1 else float("nan")
        rows.append({"scenario": key[0], "kind": first.kind, "n": first.n, "p": first.p,
                     "relevant": first.relevant, "correlated": int(first.correlated),
                     "classifier": key[1], "replications": m, "mean": mean, "sd": sd,
                     "se": sd / math.sqrt(m) if m > 1 else float("nan")})
    return rows


def relative_rows(summary_rows) -> list:
    by_cell = {}
    for row in summary_rows:
        by_cell.setdefault(row["scenario"], {})[row["classifier"]] = row["mean"]
    out = []
    for scenario, rates in by_cell.items():
        if "vwqc" not in rates:
            continue
        for c, v in relative_performance(rates).items():
            out.append({"scenario": scenario, "classifier": c, "relative": v})
    return out


def write_results(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS + ("error",))
        for r in records:
            w.writerow(r.row() + [r.error])


def write_dicts(rows, path) -> None:
    rows = list(rows)
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
