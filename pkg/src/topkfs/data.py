"""Datasets: synthetic generators, noise-feature injection, CSV I/O, splits.

All randomness comes from ``numpy.random.default_rng(seed)``, i.e. the PCG64
bit generator seeded through ``SeedSequence``. Equal seeds give equal data on
any platform running the same NumPy generator implementation.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError

log = logging.getLogger(__name__)

TASKS = ("regression", "binary", "multiclass")
SD_FLOOR = 1e-12


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    task: str = "regression"
    feature_names: tuple[str, ...] = ()
    informative: frozenset[int] | None = None
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise InvalidArgumentError(f"X must be 2-d, got shape {X.shape}")
        n, m = X.shape
        if self.task not in TASKS:
            raise InvalidArgumentError(f"unknown task {self.task!r}")
        y = np.asarray(self.y)
        if y.shape != (n,):
            raise InvalidArgumentError(f"y has shape {y.shape}, expected ({n},)")
        if not np.all(np.isfinite(X)):
            raise InvalidArgumentError("X contains NaN or infinite values")
        if self.task == "regression":
            y = y.astype(float)
            if not np.all(np.isfinite(y)):
                raise InvalidArgumentError("y contains NaN or infinite values")
        else:
            yf = y.astype(float)
            if not np.all(np.isfinite(yf)) or np.any(yf != np.round(yf)) or np.any(yf < 0):
                raise InvalidArgumentError("class labels must be non-negative integers")
            y = yf.astype(np.intp)
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(m))
        if len(names) != m:
            raise InvalidArgumentError(f"{len(names)} feature names for {m} features")
        if self.informative is not None:
            inf = frozenset(int(i) for i in self.informative)
            if any(i < 0 or i >= m for i in inf):
                raise InvalidArgumentError("informative indices out of range")
            object.__setattr__(self, "informative", inf)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return 0 if self.task == "regression" else int(self.y.max()) + 1

    def take(self, rows) -> "Dataset":
        return replace(self, X=self.X[rows], y=self.y[rows])

    def columns(self, cols) -> np.ndarray:
        return self.X[:, np.asarray(cols, dtype=np.intp)]


# -------------------------------------------------------------- generators --

def make_sparse_regression(n: int, m: int, n_informative: int, noise_sd: float = 1.0,
                           seed: int = 0) -> Dataset:
    """Gaussian design with a planted sparse coefficient vector.

    Informative coefficients are uniform in [1, 10] in magnitude with random
    signs. The true coefficients are available as ``coef`` via
    :func:`sparse_regression_coef` with the same arguments.
    """
    X, y, coef = _sparse_regression(n, m, n_informative, noise_sd, seed)
    return Dataset(X, y, "regression", informative=frozenset(np.flatnonzero(coef).tolist()),
                   name=f"sparse-regression(n={n},m={m},p={n_informative},seed={seed})")


def sparse_regression_coef(n, m, n_informative, noise_sd=1.0, seed=0) -> np.ndarray:
    return _sparse_regression(n, m, n_informative, noise_sd, seed)[2]


def _sparse_regression(n, m, n_informative, noise_sd, seed):
    if n < 1 or m < 1:
        raise InvalidArgumentError("n and m must be >= 1")
    if not 0 <= n_informative <= m:
        raise InvalidArgumentError(f"n_informative must be in [0, m], got {n_informative}")
    if noise_sd < 0:
        raise InvalidArgumentError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    support = rng.choice(m, size=n_informative, replace=False)
    coef = np.zeros(m)
    coef[support] = rng.uniform(1.0, 10.0, n_informative) * rng.choice([-1.0, 1.0], n_informative)
    y = X @ coef + noise_sd * rng.standard_normal(n)
    return X, y, coef


def make_sparse_classification(n: int, m: int, n_informative: int, n_classes: int = 2,
                               seed: int = 0, class_sep: float = 1.5) -> Dataset:
    """Labels determined by a few planted coordinates; the rest is noise.

    Each informative coordinate is shifted by ``class_sep`` times a random
    per-class sign pattern that is never constant across classes, so class
    membership is only visible through the planted columns.
    """
    if n < n_classes or m < 1 or n_classes < 2:
        raise InvalidArgumentError("need n >= n_classes >= 2 and m >= 1")
    if not 1 <= n_informative <= m:
        raise InvalidArgumentError(f"n_informative must be in [1, m], got {n_informative}")
    rng = np.random.default_rng(seed)
    y = np.arange(n) % n_classes
    rng.shuffle(y)
    support = np.sort(rng.choice(m, size=n_informative, replace=False))
    signs = rng.choice([-1.0, 1.0], size=(n_classes, n_informative))
    # a column with one sign for every class carries no label information
    flat = np.flatnonzero(np.all(signs == signs[0], axis=0))
    signs[0, flat] *= -1.0
    centers = signs * class_sep
    X = rng.standard_normal((n, m))
    X[:, support] += centers[y]
    return Dataset(X, y, "binary" if n_classes == 2 else "multiclass",
                   informative=frozenset(support.tolist()),
                   name=f"sparse-classification(n={n},m={m},p={n_informative},c={n_classes},seed={seed})")


def make_blobs(n: int, m: int = 2, sep: float = 6.0, seed: int = 0) -> Dataset:
    """Two isotropic Gaussian blobs with centres ``sep`` apart along the diagonal."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    rng.shuffle(y)
    centre = np.full(m, sep / (2.0 * np.sqrt(m)))
    X = rng.standard_normal((n, m)) + np.where(y[:, None] == 1, centre, -centre)
    return Dataset(X, y, "binary", name=f"blobs(n={n},m={m},sep={sep},seed={seed})")


# Reconstructed defaults for the small simulation study (50 samples, 100
# features, 25 informative, 80/20 split). Reconstructed, not verbatim.
PRESETS = {
    "sim-paper": {"n": 50, "m": 100, "n_informative": 25, "noise_sd": 1.0, "train_ratio": 0.8},
    "sim-recovery": {"n": 200, "m": 100, "n_informative": 25, "noise_sd": 5.0, "train_ratio": 0.8},
}


def make_preset(name: str, seed: int = 0) -> tuple[Dataset, float]:
    """Build a named synthetic preset; returns ``(dataset, train_ratio)``."""
    if name not in PRESETS:
        raise InvalidArgumentError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[name]
    d = make_sparse_regression(p["n"], p["m"], p["n_informative"], p["noise_sd"], seed)
    return replace(d, name=f"{name}(seed={seed})"), p["train_ratio"]


# ----------------------------------------------------------- noise features --

def inject_noise_features(d: Dataset, seed: int = 0, n_subset: int = 20,
                          mean_scale: float = 0.1, sd_scale: float = 0.01) -> Dataset:
    """Append one Gaussian noise column per original feature.

    A single random subset of ``n_subset`` rows (all rows if fewer) supplies
    each feature's mean and standard deviation; noise column ``m + j`` is
    drawn from N(mean_scale * mean_j, (sd_scale * sd_j)^2). The original
    columns are kept as they are and become the informative set.
    """
    rng = np.random.default_rng(seed)
    n, m = d.X.shape
    rows = rng.choice(n, size=min(n_subset, n), replace=False)
    sub = d.X[rows]
    mu = sub.mean(axis=0)
    sd = np.maximum(sub.std(axis=0), SD_FLOOR)
    noise = rng.normal(mean_scale * mu, sd_scale * sd, size=(n, m))
    X = np.hstack([d.X, noise])
    names = d.feature_names + tuple(f"noise_{s}" for s in d.feature_names)
    return Dataset(X, d.y, d.task, names, frozenset(range(m)), name=f"{d.name}+noise")


# ---------------------------------------------------------------- CSV I/O ---

def load_csv(path, target_column, task: str = "regression") -> Dataset:
    """Read a header-first, comma-separated numeric CSV.

    ``target_column`` is a header name or a 0-based column index. For
    classification, the distinct label values are mapped to 0..C-1 in
    ascending order.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidArgumentError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if isinstance(target_column, str) and not target_column.lstrip("-").isdigit():
        if target_column not in header:
            raise InvalidArgumentError(f"{path}: no column named {target_column!r}")
        t = header.index(target_column)
    else:
        t = int(target_column)
        if not -len(header) <= t < len(header):
            raise InvalidArgumentError(f"{path}: target index {t} out of range")
        t %= len(header)
    data = np.empty((len(rows) - 1, len(header)))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InvalidArgumentError(f"{path}: line {r} has {len(row)} cells, expected {len(header)}")
        for c, cell in enumerate(row):
            try:
                data[r - 2, c] = float(cell)
            except ValueError:
                raise InvalidArgumentError(
                    f"{path}: non-numeric cell {cell!r} at line {r}, column {c + 1} ({header[c]})"
                ) from None
    if not np.all(np.isfinite(data)):
        raise InvalidArgumentError(f"{path}: missing or non-finite values are not supported")
    feats = [c for c in range(len(header)) if c != t]
    y = data[:, t]
    if task != "regression":
        _, y = np.unique(y, return_inverse=True)
    return Dataset(data[:, feats], y, task, tuple(header[c] for c in feats), name=str(path))


def write_csv(d: Dataset, path, target_name: str = "target"):
    """Inverse of :func:`load_csv` with the target as the last column.

    Floats are written with ``repr`` so reading back is bit-exact.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*d.feature_names, target_name])
        for xi, yi in zip(d.X, d.y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi)) if d.task == "regression" else str(int(yi))])


# ---------------------------------------------------- splits and scaling ---

def split(d: Dataset, ratio: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded random partition into train (``round(ratio*n)`` rows) and test."""
    if not 0 < ratio < 1:
        raise InvalidArgumentError(f"ratio must be in (0, 1), got {ratio}")
    n_train = int(round(ratio * d.n))
    if n_train < 1 or n_train >= d.n:
        raise InvalidArgumentError(f"dataset with {d.n} rows is too small to split at {ratio}")
    perm = np.random.default_rng(seed).permutation(d.n)
    return d.take(np.sort(perm[:n_train])), d.take(np.sort(perm[n_train:]))


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray
    y_mean: float = 0.0
    constant_columns: tuple[int, ...] = field(default=())

    def transform(self, d: Dataset) -> Dataset:
        X = (d.X - self.mean) / self.scale
        y = d.y - self.y_mean if d.task == "regression" else d.y
        return replace(d, X=X, y=y)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist(), "y_mean": self.y_mean,
                "constant_columns": list(self.constant_columns)}


def fit_standardizer(train: Dataset, center_target: bool = True) -> Standardizer:
    mean = train.X.mean(axis=0)
    sd = train.X.std(axis=0)
    const = tuple(int(j) for j in np.flatnonzero(sd < SD_FLOOR))
    if const:
        log.warning("constant feature columns %s; using sd floor %g", list(const), SD_FLOOR)
    y_mean = float(train.y.mean()) if train.task == "regression" and center_target else 0.0
    return Standardizer(mean, np.maximum(sd, SD_FLOOR), y_mean, const)


def standardize(train: Dataset, test: Dataset | None = None, center_target: bool = True):
    """Scale features to zero mean and unit variance using train statistics only.

    Regression targets are centred on the train mean. Returns
    ``(train', test', transform)``; ``test'`` is None when no test set is given.
    """
    tr = fit_standardizer(train, center_target)
    return tr.transform(train), (tr.transform(test) if test is not None else None), tr
