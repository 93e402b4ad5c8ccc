"""Data model, CSV ingestion, standard scaling, fold splitting, and the
synthetic benchmark generator.

All arrays are float64. Randomness always flows through a seeded
``numpy.random.Generator`` backed by PCG64 so runs are reproducible across
platforms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class Dataset:
    """A feature matrix with aligned scalar targets.

    Parameters
    ----------
    features : ndarray of shape (n, d)
    targets : ndarray of shape (n,)
    column_names : optional list of d feature labels
    target_bounds : (y_min, y_max); defaults to the observed target range
    target_name : label of the target column, kept for round-tripping files
    """

    features: np.ndarray
    targets: np.ndarray
    column_names: list[str] | None = None
    target_bounds: tuple[float, float] | None = None
    target_name: str = "y"

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if features.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        if targets.ndim != 1:
            raise DataError("targets must be a 1-d vector")
        n, d = features.shape
        if n < 1 or d < 1:
            raise DataError(f"dataset must have n >= 1 and d >= 1, got n={n}, d={d}")
        if targets.shape[0] != n:
            raise DataError(
                f"feature rows ({n}) and target length ({targets.shape[0]}) disagree"
            )
        if not np.all(np.isfinite(features)) or not np.all(np.isfinite(targets)):
            raise DataError("dataset contains NaN or infinite entries")
        if self.column_names is not None and len(self.column_names) != d:
            raise DataError("column_names length does not match feature count")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        if self.target_bounds is None:
            bounds = (float(targets.min()), float(targets.max()))
            object.__setattr__(self, "target_bounds", bounds)
        else:
            lo, hi = self.target_bounds
            object.__setattr__(self, "target_bounds", (float(lo), float(hi)))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, row_ids: np.ndarray) -> "Dataset":
        """Dataset restricted to the given rows; bounds recomputed from them."""
        return Dataset(
            self.features[row_ids],
            self.targets[row_ids],
            column_names=self.column_names,
            target_name=self.target_name,
        )

    def select_columns(self, cols: list[int]) -> "Dataset":
        names = None
        if self.column_names is not None:
            names = [self.column_names[c] for c in cols]
        return Dataset(
            self.features[:, cols],
            self.targets,
            column_names=names,
            target_bounds=self.target_bounds,
            target_name=self.target_name,
        )


@dataclass(frozen=True)
class StandardScaler:
    """Per-column shift and scale fitted on training data.

    Columns with zero spread keep std 1 so the transform is a pure shift.
    """

    means: np.ndarray
    stds: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.means) / self.stds

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.stds + self.means


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of each row to one of F cross-validation folds."""

    fold_assignments: np.ndarray
    seed: int
    n_folds: int

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """Row ids of the train and test split for one fold."""
        mask = self.fold_assignments == fold
        return np.nonzero(~mask)[0], np.nonzero(mask)[0]


def load_csv(path, target_column, has_header: bool = True) -> Dataset:
    """Load a comma-separated file into a Dataset.

    Parameters
    ----------
    path : file path
    target_column : column name (requires a header) or integer index
    has_header : whether the first row holds column labels

    Raises
    ------
    DataError
        Missing file, unparseable cell (reported with row and column),
        absent target column, zero data rows, or zero feature columns.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise DataError(f"{path} is empty")

    if has_header:
        header = [c.strip() for c in rows[0]]
        data_rows = rows[1:]
        first_data_line = 2
    else:
        header = [f"c{i}" for i in range(len(rows[0]))]
        data_rows = rows
        first_data_line = 1
    if not data_rows:
        raise DataError(f"{path} has a header but no data rows")

    n_cols = len(header)
    if isinstance(target_column, int) or (
        isinstance(target_column, str) and target_column.lstrip("-").isdigit()
    ):
        target_idx = int(target_column)
        if target_idx < 0:
            target_idx += n_cols
        if not 0 <= target_idx < n_cols:
            raise DataError(f"target column index {target_column} out of range")
    else:
        if target_column not in header:
            raise DataError(f"target column {target_column!r} not found in header {header}")
        target_idx = header.index(target_column)

    values = np.empty((len(data_rows), n_cols), dtype=np.float64)
    for i, row in enumerate(data_rows):
        if len(row) != n_cols:
            raise DataError(
                f"row {first_data_line + i} has {len(row)} cells, expected {n_cols}"
            )
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"cell {cell!r} at row {first_data_line + i}, column {header[j]!r}"
                    " does not parse as a number"
                ) from None
            if not math.isfinite(v):
                raise DataError(
                    f"non-finite value at row {first_data_line + i}, column {header[j]!r}"
                )
            values[i, j] = v

    feature_cols = [j for j in range(n_cols) if j != target_idx]
    if not feature_cols:
        raise DataError("file has only a target column; need at least one feature")
    return Dataset(
        values[:, feature_cols],
        values[:, target_idx],
        column_names=[header[j] for j in feature_cols],
        target_name=header[target_idx],
    )


def write_csv(data: Dataset, path) -> None:
    """Write a Dataset as CSV with feature columns followed by the target."""
    names = data.column_names or [f"x{i}" for i in range(data.d)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + [data.target_name])
        for i in range(data.n):
            writer.writerow([repr(float(v)) for v in data.features[i]]
                            + [repr(float(data.targets[i]))])


def fit_standard_scaler(data: Dataset) -> StandardScaler:
    """Fit per-column mean and population standard deviation.

    Requires n >= 2. Constant columns get std 1 so downstream weighting can
    still suppress them without a divide-by-zero here.
    """
    if data.n < 2:
        raise DataError("standard scaler needs at least 2 rows")
    means = data.features.mean(axis=0)
    stds = data.features.std(axis=0)
    stds = np.where(stds <= 0.0, 1.0, stds)
    return StandardScaler(means, stds)


def make_folds(n: int, n_folds: int, seed: int) -> FoldPlan:
    """Shuffled, balanced fold assignment; deterministic for a fixed seed."""
    if n_folds < 2 or n_folds > n:
        raise ConfigError(f"fold count must satisfy 2 <= F <= n, got F={n_folds}, n={n}")
    order = _rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = np.arange(n) % n_folds
    return FoldPlan(assignments, seed, n_folds)


def friedman1(n_samples: int, n_features: int = 10, noise_scale: float = 0.0,
              seed: int = 0) -> Dataset:
    """Synthetic regression benchmark with five informative dimensions.

    Features are i.i.d. uniform on [0, 1]^d and

        y = 10*x3 + 5*x4 + 20*(x2 - 0.5)^2 + 10*sin(pi*x0*x1) + noise_scale*e

    with e standard normal. Columns beyond index 4 never enter the target,
    which makes them pure distractors for feature-weight learning.
    """
    if n_features < 5:
        raise ConfigError(f"n_features must be >= 5, got {n_features}")
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    if noise_scale < 0:
        raise ConfigError("noise_scale must be >= 0")
    rng = _rng(seed)
    x = rng.random((n_samples, n_features))
    y = friedman1_targets(x)
    if noise_scale != 0.0:
        y = y + noise_scale * rng.standard_normal(n_samples)
    return Dataset(x, y, column_names=[f"x{i}" for i in range(n_features)])


def friedman1_targets(x: np.ndarray) -> np.ndarray:
    """Noiseless target surface of :func:`friedman1`, usable as ground truth."""
    return (
        10.0 * x[:, 3]
        + 5.0 * x[:, 4]
        + 20.0 * (x[:, 2] - 0.5) ** 2
        + 10.0 * np.sin(np.pi * x[:, 0] * x[:, 1])
    )
