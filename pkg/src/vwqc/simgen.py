"""Synthetic two-class scenarios: t3, log|t3|, exponential and mixed-transform blocks."""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .dataset import Dataset, pooled_within_class_sd
from .errors import DataError

GENERATOR_VERSION = "1"
KINDS = ("t3", "logabst", "exp", "ddv")
RELEVANT_FRACTIONS = (0.10, 0.50, 1.00)
SHIFTS = {"t3": 0.5, "logabst": 0.4, "exp": 0.2, "ddv": 0.2}
RANK_TOL = 1e-7
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    n: int
    p: int
    relevant_fraction: float = 1.0
    correlated: bool = False
    seed: int = 0
    standardize: bool = False
    shift_before_transform: bool = True
    fill_order: str = "F"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 2 or self.n % 2:
            raise DataError("n must be an even integer >= 2")
        if self.p < 1:
            raise DataError("p must be at least 1")
        if not 0 < self.relevant_fraction <= 1:
            raise DataError("relevant_fraction must lie in (0, 1]")
        if self.fill_order not in ("F", "C"):
            raise DataError("fill_order must be 'F' or 'C'")
        if not 0 <= self.seed <= _MASK64:
            raise DataError("seed must be a non-negative 64-bit integer")
        if self.relevant_count < 1:
            raise DataError("relevant variable count rounds to zero")
        if self.kind == "ddv" and not self.standardize:
            object.__setattr__(self, "standardize", True)

    @property
    def relevant_count(self) -> int:
        # half-up rounding, so 0.5 * 5 -> 3 rather than banker's 2
        return int(np.floor(self.relevant_fraction * self.p + 0.5))

    @property
    def label(self) -> str:
        corr = "cor" if self.correlated else "unc"
        return f"{self.kind}_{corr}_n{self.n}_p{self.p}_r{int(round(self.relevant_fraction * 100))}"

    def with_seed(self, seed: int) -> "ScenarioSpec":
        d = asdict(self)
        d["seed"] = int(seed)
        return ScenarioSpec(**d)

    def to_dict(self) -> dict:
        return asdict(self)


# -- covariance --------------------------------------------------------------------

def _householder_q(b: np.ndarray, tol: float = RANK_TOL):
    """Orthogonal factor of ``b`` built from rank-many Householder reflectors.

    Columns whose remaining norm falls below ``tol`` times their original norm
    are treated as linearly dependent and cycled to the end, so only ``rank``
    reflectors are accumulated.  Returns ``(q, rank)``.
    """
    x = np.array(b, dtype=float)
    n, p = x.shape
    orig = np.linalg.norm(x, axis=0)
    reflectors = []
    order = list(range(p))
    limit = p
    l = 0
    while l < min(limit, n):
        col = x[l:, l]
        nrm = np.linalg.norm(col)
        if orig[order[l]] == 0 or nrm < tol * orig[order[l]]:
            x[:, l:limit] = np.roll(x[:, l:limit], -1, axis=1)
            order[l:limit] = order[l + 1:limit] + [order[l]]
            limit -= 1
            continue
        if col[0] != 0:
            nrm = np.copysign(nrm, col[0])
        u = col / nrm
        u[0] += 1.0
        v = np.zeros(n)
        v[l:] = u
        h = np.eye(n) - np.outer(v, v) / v[l]
        x = h @ x
        reflectors.append(h)
        l += 1
    q = np.eye(n)
    for h in reversed(reflectors):
        q = h @ q
    return q, len(reflectors)


def scale_profile(p: int) -> np.ndarray:
    """Normalised eigenvalue profile ``(p+2-j)^(1.1+0.8j/(p-1))`` divided by its max."""
    j = np.arange(1, p + 1, dtype=float)
    s = (p + 2 - j) ** (1.1 + 0.8 * j / (p - 1))
    return s / s.max()


def build_covariance(p: int, fill_order: str = "F") -> np.ndarray:
    """Covariance ``A' diag(s) A`` with ``A`` orthogonal from a linearly filled matrix."""
    if p < 1:
        raise DataError("p must be at least 1")
    if p == 1:
        return np.ones((1, 1))
    b = np.linspace(1.0, 2.0, p * p).reshape((p, p), order=fill_order)
    a, _ = _householder_q(b)
    sigma = (a.T * scale_profile(p)) @ a
    return (sigma + sigma.T) / 2.0


def covariance_to_correlation(sigma: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.diag(sigma))
    c = sigma / np.outer(d, d)
    np.fill_diagonal(c, 1.0)
    return c


def correlation_range(p: int, fill_order: str = "F"):
    """Smallest and largest off-diagonal correlation implied by ``build_covariance``."""
    c = covariance_to_correlation(build_covariance(p, fill_order))
    off = c[~np.eye(p, dtype=bool)]
    return float(off.min()), float(off.max())


# -- seeds -------------------------------------------------------------------------

def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def derive_seed(master: int, key: str, replication: int) -> int:
    """Child seed for one (cell, replication) that does not depend on scheduling order."""
    s = splitmix64(int(master) & _MASK64)
    s = splitmix64(s ^ stable_hash(key))
    return splitmix64(s ^ (int(replication) & _MASK64))


# -- generation --------------------------------------------------------------------

def ddv_blocks(p: int) -> list:
    """Five contiguous near-equal index blocks; earlier blocks take the remainder."""
    return [b for b in np.array_split(np.arange(p), 5)]


_DDV_TRANSFORMS = (
    lambda v: v,
    np.exp,
    lambda v: np.log(np.abs(v)),
    np.square,
    lambda v: np.sqrt(np.abs(v)),
)


def _gaussian(rng, m, p, chol):
    z = rng.standard_normal((m, p))
    return z if chol is None else z @ chol.T


def _t3(z):
    return np.sign(z) * stats.t.isf(stats.norm.sf(np.abs(z)), 3)


def _shift_vector(spec: ScenarioSpec) -> np.ndarray:
    r = spec.relevant_count
    shift = np.zeros(spec.p)
    size = SHIFTS[spec.kind]
    if spec.kind == "logabst":
        half = (r + 1) // 2
        shift[:half] = size
        shift[half:r] = -size
    else:
        shift[:r] = size
    return shift


def _transform(spec: ScenarioSpec, base: np.ndarray) -> np.ndarray:
    if spec.kind == "ddv":
        out = np.empty_like(base)
        for block, f in zip(ddv_blocks(spec.p), _DDV_TRANSFORMS):
            out[:, block] = f(base[:, block])
        return out
    if spec.kind == "logabst":
        return np.log(np.abs(base))
    return base


def _marginal(spec: ScenarioSpec, z: np.ndarray) -> np.ndarray:
    if spec.kind in ("t3", "logabst"):
        return _t3(z)
    if spec.kind == "exp":
        return -stats.norm.logsf(z)
    return z


def _sample(spec: ScenarioSpec, rng, chol, shift) -> np.ndarray:
    half = spec.n // 2
    z = _gaussian(rng, spec.n, spec.p, chol)
    w = _marginal(spec, z)
    if spec.shift_before_transform:
        w[half:] += shift
        return _transform(spec, w)
    x = _transform(spec, w)
    x[half:] += shift
    return x


def generate(spec: ScenarioSpec):
    """Independent train and test sets, each with ``n/2`` rows per class.

    Correlated scenarios couple the marginals through a Gaussian copula whose
    correlation matrix comes from ``build_covariance``.
    """
    chol = None
    if spec.correlated and spec.p > 1:
        chol = np.linalg.cholesky(covariance_to_correlation(build_covariance(spec.p, spec.fill_order)))
    shift = _shift_vector(spec)
    rng = np.random.default_rng(spec.seed)
    labels = np.repeat([0, 1], spec.n // 2)
    names = tuple(f"x{j + 1}" for j in range(spec.p))
    sets = []
    for _ in range(2):
        x = _sample(spec, rng, chol, shift)
        sets.append(Dataset(x, labels, 2, variable_names=names))
    train, test = sets
    if spec.standardize:
        sd = pooled_within_class_sd(train)
        train = train.with_values(train.values / sd)
        test = test.with_values(test.values / sd)
    return train, test


def metadata(spec: ScenarioSpec, extra: Optional[dict] = None) -> dict:
    doc = {
        "generator_version": GENERATOR_VERSION,
        "spec": spec.to_dict(),
        "relevant_count": spec.relevant_count,
        "copula": "gaussian" if spec.correlated else "independent",
        "shift_ordering": "before_transform" if spec.shift_before_transform else "after_transform",
        "fill_order": spec.fill_order,
        "joint_distribution_assumed": bool(spec.correlated and spec.kind != "ddv"),
    }
    if extra:
        doc.update(extra)
    return doc


def paper_grid(seed: int = 0) -> list:
    """The full 4 x 3 x 3 x 2 x 4 grid of 288 settings."""
    cells = []
    for kind in KINDS:
        for correlated in (False, True):
            for n in (50, 100, 500):
                for p in (10, 50, 100, 500):
                    for frac in RELEVANT_FRACTIONS:
                        cells.append(ScenarioSpec(kind, n, p, frac, correlated, seed,
                                                  standardize=(kind == "ddv")))
    return cells
