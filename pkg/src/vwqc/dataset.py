"""Containers, CSV ingestion and model persistence."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DataError, DimensionError, EmptyClassError, ModelFormatError, ParseError

MODEL_FORMAT = "vwqc-model"
MODEL_SCHEMA_VERSION = 1


def _frozen(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Numeric observations with integer class labels.

    ``values`` is stored column-major (Fortran order) because every algorithm
    in this package sweeps one variable at a time.  Instances are read-only.
    """

    values: np.ndarray
    labels: np.ndarray
    class_count: int
    variable_names: Optional[tuple] = None
    class_labels: Optional[tuple] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float, order="F", copy=True)
        if values.ndim == 1:
            values = values.reshape(-1, 1, order="F")
        if values.ndim != 2:
            raise DataError("values must be a 2-d array")
        labels = np.array(self.labels, dtype=np.int64, copy=True).ravel()
        if labels.shape[0] != values.shape[0]:
            raise DataError(f"{labels.shape[0]} labels for {values.shape[0]} rows")
        if not np.all(np.isfinite(values)):
            raise DataError("values contain NaN or Inf")
        k = int(self.class_count)
        if k < 1:
            raise DataError("class_count must be >= 1")
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise DataError(f"labels must lie in 0..{k - 1}")
        names = self.variable_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != values.shape[1]:
                raise DataError("variable_names length differs from column count")
        class_labels = self.class_labels
        if class_labels is not None:
            class_labels = tuple(str(s) for s in class_labels)
            if len(class_labels) != k:
                raise DataError("class_labels length differs from class_count")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "class_count", k)
        object.__setattr__(self, "variable_names", names)
        object.__setattr__(self, "class_labels", class_labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def require_nonempty_classes(self):
        sizes = self.class_sizes()
        empty = np.flatnonzero(sizes == 0)
        if empty.size:
            raise EmptyClassError(f"classes {empty.tolist()} have no observations")

    def subset(self, rows) -> "Dataset":
        return Dataset(self.values[rows], self.labels[rows], self.class_count,
                       self.variable_names, self.class_labels)

    def with_values(self, values) -> "Dataset":
        return Dataset(values, self.labels, self.class_count,
                       self.variable_names, self.class_labels)

    def label_names(self) -> list:
        """Original label strings, falling back to the integer indices."""
        if self.class_labels is None:
            return [str(k) for k in range(self.class_count)]
        return list(self.class_labels)


def pooled_within_class_sd(dataset: Dataset) -> np.ndarray:
    """Per-variable standard deviation after centring each class at its own mean.

    Uses the ``n - K`` denominator.  Variables with zero pooled spread get a
    divisor of 1 so the result is always strictly positive.
    """
    x = dataset.values
    resid = np.empty_like(x)
    for k in range(dataset.class_count):
        rows = dataset.labels == k
        if rows.any():
            resid[rows] = x[rows] - x[rows].mean(axis=0)
    dof = max(dataset.n - int((dataset.class_sizes() > 0).sum()), 1)
    sd = np.sqrt((resid ** 2).sum(axis=0) / dof)
    return np.where(sd > 0, sd, 1.0)


def _parse_cell(text, row, col):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"row {row}, column {col}: cannot parse {text!r} as a number",
                         row=row, column=col) from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}, column {col}: non-finite value {text!r}", row=row, column=col)
    return value


def load_csv(path, label_column: Union[int, str, None] = None, has_header: bool = True,
             delimiter: str = ",") -> Dataset:
    """Read a delimited text file into a :class:`Dataset`.

    Parameters
    ----------
    path : file path
    label_column : column name (requires a header) or 0-based index;
        negative indices count from the end.  Defaults to the last column.
    has_header : whether the first row holds column names.
    delimiter : field separator.

    Raw labels are mapped to ``0..K-1`` in order of first appearance and kept
    in ``Dataset.class_labels``.  Row numbers in errors are 1-based file lines.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = None
    first_line = 1
    if has_header:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_line = 2
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0])
    if isinstance(label_column, str):
        if header is None:
            raise DataError("a label column name needs a header row")
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
    else:
        label_idx = width - 1 if label_column is None else int(label_column)
        if label_idx < 0:
            label_idx += width
        if not 0 <= label_idx < width:
            raise DataError(f"label column index {label_column} out of range for {width} columns")
    if width < 2:
        raise DataError("need at least one feature column besides the label column")

    features, raw_labels = [], []
    for offset, row in enumerate(rows):
        line = first_line + offset
        if len(row) != width:
            raise ParseError(f"row {line}: expected {width} fields, found {len(row)}", row=line)
        raw_labels.append(row[label_idx].strip())
        features.append([_parse_cell(c.strip(), line, j) for j, c in enumerate(row) if j != label_idx])

    mapping = {}
    for lab in raw_labels:
        mapping.setdefault(lab, len(mapping))
    labels = [mapping[lab] for lab in raw_labels]
    names = None
    if header is not None:
        names = tuple(h for j, h in enumerate(header) if j != label_idx)
    return Dataset(np.asarray(features, dtype=float), labels, len(mapping),
                   variable_names=names, class_labels=tuple(mapping))


def load_iris() -> Dataset:
    """The bundled Iris data (150 x 4, three species)."""
    path = Path(__file__).with_name("resources") / "iris.csv"
    return load_csv(path, label_column="species")


def load_matrix_csv(path, has_header: bool = True, delimiter: str = ",", drop_column=None):
    """Read an all-numeric CSV as a float matrix, optionally dropping one column."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    start = 1 if has_header else 0
    header = [c.strip() for c in rows[0]] if has_header and rows else None
    body = rows[start:]
    if not body:
        raise DataError(f"{path}: no data rows")
    width = len(body[0])
    drop = None
    if drop_column is not None:
        if isinstance(drop_column, str):
            if header is None or drop_column not in header:
                raise DataError(f"column {drop_column!r} not found")
            drop = header.index(drop_column)
        else:
            drop = int(drop_column) % width
    out = []
    for offset, row in enumerate(body):
        line = start + offset + 1
        if len(row) != width:
            raise ParseError(f"row {line}: expected {width} fields, found {len(row)}", row=line)
        out.append([_parse_cell(c.strip(), line, j) for j, c in enumerate(row) if j != drop])
    labels = [row[drop].strip() for row in body] if drop is not None else None
    return np.asarray(out, dtype=float), labels


@dataclass(frozen=True, eq=False)
class QuantileModel:
    """Everything needed to classify new observations with the fitted rule.

    ``quantiles[k, j]`` is the ``theta[j]``-quantile of variable ``j`` within
    class ``k`` (on the standardised scale when ``standardization`` is set).
    """

    theta: np.ndarray
    lambda_: np.ndarray
    quantiles: np.ndarray
    class_count: int
    lambda_cap: float
    standardization: Optional[np.ndarray] = None
    class_labels: Optional[tuple] = None
    variable_names: Optional[tuple] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).ravel()
        lam = np.array(self.lambda_, dtype=float).ravel()
        q = np.array(self.quantiles, dtype=float, ndmin=2)
        k, cap = int(self.class_count), float(self.lambda_cap)
        p = theta.size
        if lam.size != p or q.shape != (k, p):
            raise DimensionError(f"inconsistent shapes: theta {theta.shape}, lambda {lam.shape}, "
                                 f"quantiles {q.shape}, class_count {k}")
        if not cap > 0 or not math.isfinite(cap):
            raise DataError("lambda_cap must be positive and finite")
        if not np.all((theta > 0) & (theta < 1)):
            raise DataError("all theta must lie strictly inside (0, 1)")
        if not np.all((lam > 0) & (lam <= cap)):
            raise DataError("all lambda must lie in (0, lambda_cap]")
        if not np.all(np.isfinite(q)):
            raise DataError("quantiles must be finite")
        std = self.standardization
        if std is not None:
            std = np.array(std, dtype=float).ravel()
            if std.size != p or not np.all((std > 0) & np.isfinite(std)):
                raise DataError("standardization divisors must be p positive finite numbers")
            std = _frozen(std)
        if self.class_labels is not None and len(self.class_labels) != k:
            raise DataError("class_labels length differs from class_count")
        object.__setattr__(self, "theta", _frozen(theta))
        object.__setattr__(self, "lambda_", _frozen(lam))
        object.__setattr__(self, "quantiles", _frozen(q))
        object.__setattr__(self, "class_count", k)
        object.__setattr__(self, "lambda_cap", cap)
        object.__setattr__(self, "standardization", std)
        if self.class_labels is not None:
            object.__setattr__(self, "class_labels", tuple(str(s) for s in self.class_labels))
        if self.variable_names is not None:
            object.__setattr__(self, "variable_names", tuple(str(s) for s in self.variable_names))

    @property
    def p(self) -> int:
        return self.theta.size

    def label_names(self) -> list:
        if self.class_labels is None:
            return [str(k) for k in range(self.class_count)]
        return list(self.class_labels)


def _floats(a):
    # repr() of a Python float is the shortest string that round-trips exactly
    return [float(v) for v in np.asarray(a).ravel()]


def model_to_dict(model: QuantileModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "schema_version": MODEL_SCHEMA_VERSION,
        "class_count": model.class_count,
        "p": model.p,
        "theta": _floats(model.theta),
        "lambda": _floats(model.lambda_),
        "quantiles": [_floats(row) for row in model.quantiles],
        "lambda_cap": model.lambda_cap,
        "standardization": None if model.standardization is None else _floats(model.standardization),
        "class_labels": None if model.class_labels is None else list(model.class_labels),
        "variable_names": None if model.variable_names is None else list(model.variable_names),
        "metadata": model.metadata,
    }


def model_from_dict(doc) -> QuantileModel:
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a vwqc model file")
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ModelFormatError(f"unsupported schema_version {doc.get('schema_version')!r}, "
                               f"expected {MODEL_SCHEMA_VERSION}")
    try:
        model = QuantileModel(
            theta=doc["theta"],
            lambda_=doc["lambda"],
            quantiles=doc["quantiles"],
            class_count=doc["class_count"],
            lambda_cap=doc["lambda_cap"],
            standardization=doc.get("standardization"),
            class_labels=None if doc.get("class_labels") is None else tuple(doc["class_labels"]),
            variable_names=None if doc.get("variable_names") is None else tuple(doc["variable_names"]),
            metadata=doc.get("metadata") or {},
        )
    except KeyError as exc:
        raise ModelFormatError(f"model file lacks field {exc.args[0]!r}") from None
    except (DataError, DimensionError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"model file violates an invariant: {exc}") from None
    if doc.get("p") is not None and doc["p"] != model.p:
        raise ModelFormatError("declared p does not match theta length")
    return model


def save_model(model: QuantileModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2, allow_nan=False)
        fh.write("\n")


def load_model(path) -> QuantileModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: corrupt model file ({exc.msg} at line {exc.lineno})") from None
    return model_from_dict(doc)
