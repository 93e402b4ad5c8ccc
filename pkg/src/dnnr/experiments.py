"""Benchmark harness: k-fold grid-search evaluation, parameter sweeps on the
synthetic Friedman-1 task, and the error-bound simulation.

The evaluation protocol is fixed: per fold, a standard scaler (and, for the
scaled method variants, metric weights) is fit on the train split only;
hyperparameters are chosen on an inner 80/20 validation split of the train
fold; the winning configuration is refit on the whole train fold before test
inference. Sweeps tune on the first fold and freeze the choice for the rest.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy import stats

from .dataset import (Dataset, StandardScaler, fit_standard_scaler, friedman1,
                      make_folds)
from .errors import ConfigError, DataError
from .featscale import ScaleTrainConfig, train_weights
from .nnindex import ScalingWeights
from .predictor import (DnnrConfig, fit_dnnr, fit_knn, fit_ll,
                        predict_dnnr_many, predict_knn_many, predict_ll_many)
from .theory import pointwise_tolerances

METHODS = (
    "dnnr", "dnnr2", "dnnr-lasso", "dnnr-unscaled",
    "knn", "knn-scaled", "ll", "ll-scaled",
)
_SCALED_METHODS = frozenset({"dnnr", "dnnr2", "dnnr-lasso", "knn-scaled", "ll-scaled"})
_GRID_KEYS = {
    "dnnr": ("k", "k_prime"),
    "dnnr2": ("k", "k_prime"),
    "dnnr-lasso": ("k", "k_prime", "lasso_lambda"),
    "dnnr-unscaled": ("k", "k_prime"),
    "knn": ("k",),
    "knn-scaled": ("k",),
    "ll": ("k_region",),
    "ll-scaled": ("k_region",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark cell: a method, a fold count, a seed, and a grid.

    ``grid`` maps hyperparameter names to candidate value lists; ``None``
    selects the built-in defaults for the dataset's size. ``scale_features``
    overrides the method's default use of learned metric weights.
    """

    method: str
    folds: int = 10
    seed: int = 0
    grid: dict | None = None
    scale_features: bool | None = None

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(
                f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if self.grid is not None:
            allowed = set(_GRID_KEYS[self.method])
            bad = set(self.grid) - allowed
            if bad:
                raise ConfigError(
                    f"grid keys {sorted(bad)} invalid for {self.method};"
                    f" allowed: {sorted(allowed)}")
            for key, values in self.grid.items():
                if not isinstance(values, (list, tuple)) or len(values) == 0:
                    raise ConfigError(f"grid entry {key!r} must be a non-empty list")
                for v in values:
                    if isinstance(v, bool) or not isinstance(v, (int, float)):
                        raise ConfigError(
                            f"grid entry {key!r} holds non-numeric value {v!r}")

    @property
    def uses_weights(self) -> bool:
        if self.scale_features is not None:
            return self.scale_features
        return self.method in _SCALED_METHODS


@dataclass(frozen=True)
class ResultReport:
    """Cross-validated scores for one experiment.

    ``r2`` is the mean over folds of 1 - MSE / var(y_test). Canonical
    serialization excludes ``wall_time_s`` so that byte-level comparisons
    are meaningful across runs.
    """

    method: str
    per_fold_mse: list[float]
    mean_mse: float
    std_mse: float
    r2: float
    per_fold_r2: list[float]
    best_hyperparameters: dict
    per_fold_hyperparameters: list[dict]
    folds: int
    seed: int
    wall_time_s: float

    def as_dict(self, include_timing: bool = False) -> dict:
        out = {
            "method": self.method,
            "per_fold_mse": self.per_fold_mse,
            "mean_mse": self.mean_mse,
            "std_mse": self.std_mse,
            "r2": self.r2,
            "per_fold_r2": self.per_fold_r2,
            "best_hyperparameters": self.best_hyperparameters,
            "per_fold_hyperparameters": self.per_fold_hyperparameters,
            "folds": self.folds,
            "seed": self.seed,
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time_s
        return out

    def as_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.as_dict(include_timing), sort_keys=True)


def sample_kprime_grid(d: int, lower: float, upper: float, count: int) -> list[int]:
    """Sample ``count`` distinct integers spaced evenly in [lower*d, upper*d].

    Every value is at least d. A range too narrow for ``count`` distinct
    integers yields fewer values and a warning; ``count=1`` returns the
    midpoint.
    """
    if lower < 1:
        raise ConfigError("lower must be >= 1")
    if upper <= lower:
        raise ConfigError("upper must exceed lower")
    if count < 1:
        raise ConfigError("count must be >= 1")
    lo = max(d, int(math.ceil(lower * d)))
    hi = max(lo, int(math.floor(upper * d)))
    if count == 1:
        return [int(round((lo + hi) / 2))]
    raw = np.rint(np.linspace(lo, hi, count)).astype(int)
    values = sorted(set(int(v) for v in raw))
    if len(values) < count:
        warnings.warn(
            f"range [{lo}, {hi}] holds only {len(values)} distinct integers,"
            f" fewer than the requested {count}", stacklevel=2)
    return values


def default_grid(method: str, n: int, d: int) -> dict:
    """Built-in hyperparameter grid for a method at a given dataset size."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    small, medium = n < 2000, n < 50000
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if method in ("dnnr", "dnnr2", "dnnr-lasso", "dnnr-unscaled"):
            if small:
                grid = {"k": [1, 2, 3, 5, 7], "k_prime": sample_kprime_grid(d, 2, 15, 30)}
            elif medium:
                grid = {"k": [3, 4], "k_prime": sample_kprime_grid(d, 2, 18, 20)}
            else:
                grid = {"k": [3], "k_prime": sample_kprime_grid(d, 2, 12, 14)}
            if method == "dnnr2":
                grid["k_prime"] = sorted(set(max(v, 2 * d) for v in grid["k_prime"]))
            if method == "dnnr-lasso":
                grid["lasso_lambda"] = [0.001, 0.01, 0.1, 1.0]
            return grid
        if method in ("knn", "knn-scaled"):
            if small:
                return {"k": [2, 5, 7, 10, 20, 30, 40, 50]}
            if medium:
                return {"k": [2, 5, 7, 10, 25, 50, 100, 250]}
            return {"k": [2, 3, 5, 7, 10, 12, 15, 20, 25]}
        return {"k_region": sample_kprime_grid(d, 2, 25, 50)}


def _grid_cells(grid: dict) -> list[dict]:
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in product(*(grid[k] for k in keys))]


def _clamp_cell(method: str, cell: dict, n_fit: int, d: int) -> dict | None:
    """Clamp a grid cell to what n_fit rows can support; None if impossible."""
    hp = dict(cell)
    if method in ("knn", "knn-scaled"):
        hp["k"] = min(int(hp["k"]), n_fit)
        return hp if hp["k"] >= 1 else None
    if method in ("ll", "ll-scaled"):
        hp["k_region"] = min(int(hp["k_region"]), n_fit)
        return hp if hp["k_region"] >= d + 1 else None
    order = 2 if method == "dnnr2" else 1
    hp["k"] = min(int(hp["k"]), n_fit)
    hp["k_prime"] = min(int(hp["k_prime"]), n_fit - 1)
    if hp["k"] < 1 or hp["k_prime"] < order * d:
        return None
    return hp


def resolve_hyperparameters(method: str, given: dict, n: int, d: int) -> dict:
    """Fill in method defaults and validate a single hyperparameter map."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    allowed = _GRID_KEYS[method]
    bad = set(given) - set(allowed)
    if bad:
        raise ConfigError(
            f"hyperparameters {sorted(bad)} invalid for {method};"
            f" allowed: {sorted(allowed)}")
    order = 2 if method == "dnnr2" else 1
    defaults = {
        "k": 3,
        "k_prime": max(32, order * d + 2),
        "k_region": max(32, d + 2),
        "lasso_lambda": 0.01,
    }
    hp = {}
    for key in allowed:
        value = given.get(key, defaults[key])
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"hyperparameter {key!r} must be numeric, got {value!r}")
        if key == "lasso_lambda":
            if value < 0:
                raise ConfigError("lasso_lambda must be >= 0")
            hp[key] = float(value)
        else:
            if value != int(value) or value < 1:
                raise ConfigError(f"hyperparameter {key!r} must be a positive integer")
            hp[key] = int(value)
    return hp


def _fit_in_scaled_space(method: str, train_s: Dataset, hp: dict,
                         weights: ScalingWeights | None):
    """Fit one method on already-scaled features; returns (model, predict)."""
    if method in ("knn", "knn-scaled"):
        w = weights if method == "knn-scaled" else None
        return fit_knn(train_s, hp["k"], w), predict_knn_many
    if method in ("ll", "ll-scaled"):
        w = weights if method == "ll-scaled" else None
        return fit_ll(train_s, hp["k_region"], w), predict_ll_many
    cfg = DnnrConfig(
        k=hp["k"],
        k_prime=hp["k_prime"],
        order=2 if method == "dnnr2" else 1,
        lasso_lambda=hp.get("lasso_lambda") if method == "dnnr-lasso" else None,
    )
    w = None if method == "dnnr-unscaled" else weights
    return fit_dnnr(train_s, cfg, weights=w), predict_dnnr_many


@dataclass
class FittedMethod:
    """A fitted method bundled with its preprocessing, ready to predict."""

    method: str
    scaler: StandardScaler
    weights: ScalingWeights | None
    model: object
    predict_many: object
    hyperparameters: dict

    def predict(self, features: np.ndarray) -> np.ndarray:
        pts = np.asarray(features, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
        return self.predict_many(self.model, self.scaler.transform(pts))


def _train_fold_weights(train_s: Dataset, seed: int) -> ScalingWeights | None:
    k_prime = min(32, train_s.n // 4)
    if k_prime < 2:
        return None
    report = train_weights(train_s, ScaleTrainConfig(k_prime=k_prime, seed=seed))
    return report.final_weights


def fit_method(method: str, train: Dataset, hyperparameters: dict,
               scale_features: bool | None = None, seed: int = 0) -> FittedMethod:
    """Fit a single method end to end on raw (unscaled) training data.

    Standardizes features, trains metric weights when the method calls for
    them, and returns a bundle whose ``predict`` accepts raw features.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    use_weights = (method in _SCALED_METHODS if scale_features is None
                   else scale_features)
    scaler = fit_standard_scaler(train)
    train_s = Dataset(scaler.transform(train.features), train.targets,
                      column_names=train.column_names,
                      target_name=train.target_name)
    hp = _clamp_cell(method, hyperparameters, train_s.n, train_s.d)
    if hp is None:
        raise ConfigError(
            f"hyperparameters {hyperparameters} infeasible for n={train.n}, d={train.d}")
    weights = _train_fold_weights(train_s, seed) if use_weights else None
    model, predict_many = _fit_in_scaled_space(method, train_s, hp, weights)
    return FittedMethod(method=method, scaler=scaler, weights=weights,
                        model=model, predict_many=predict_many,
                        hyperparameters=hp)


def rebuild_method(method: str, train: Dataset, hyperparameters: dict,
                   scaler: StandardScaler,
                   weights: ScalingWeights | None) -> FittedMethod:
    """Reassemble a fitted bundle from persisted preprocessing.

    Unlike :func:`fit_method` this refits only the model itself; the scaler
    statistics and metric weights come from the caller (typically a stored
    bundle), so predictions reproduce the original fit exactly.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    hp = _clamp_cell(method, hyperparameters, train.n, train.d)
    if hp is None:
        raise ConfigError(
            f"hyperparameters {hyperparameters} infeasible for n={train.n}, d={train.d}")
    train_s = Dataset(scaler.transform(train.features), train.targets)
    model, predict_many = _fit_in_scaled_space(method, train_s, hp, weights)
    return FittedMethod(method=method, scaler=scaler, weights=weights,
                        model=model, predict_many=predict_many,
                        hyperparameters=hp)


def _search_grid(method: str, train_s: Dataset, cells: list[dict],
                 weights: ScalingWeights | None, rng: np.random.Generator):
    """Pick the grid cell with the lowest inner-validation MSE."""
    n = train_s.n
    n_val = max(1, n // 5)
    order = rng.permutation(n)
    val_ids, fit_ids = order[:n_val], order[n_val:]
    inner_fit = train_s.subset(fit_ids)
    val_x, val_y = train_s.features[val_ids], train_s.targets[val_ids]

    best_hp, best_mse = None, math.inf
    seen = set()
    for cell in cells:
        hp = _clamp_cell(method, cell, inner_fit.n, train_s.d)
        if hp is None:
            continue
        key = tuple(sorted(hp.items()))
        if key in seen:
            continue
        seen.add(key)
        model, predict_many = _fit_in_scaled_space(method, inner_fit, hp, weights)
        mse = float(np.mean((predict_many(model, val_x) - val_y) ** 2))
        if mse < best_mse:
            best_hp, best_mse = hp, mse
    if best_hp is None:
        raise ConfigError(
            f"no feasible grid cell for {method} with {inner_fit.n} inner rows")
    return best_hp


def _fold_r2(mse: float, y_test: np.ndarray) -> float:
    var = float(np.var(y_test))
    if var > 0.0:
        return 1.0 - mse / var
    return 1.0 if mse == 0.0 else -math.inf


def run_experiment(data: Dataset, config: ExperimentConfig,
                   tune_first_fold_only: bool = False) -> ResultReport:
    """Cross-validated grid-search evaluation of one method.

    Per fold: scaler (and metric weights, for scaled methods) fit on the
    train split; hyperparameters picked on an inner 80/20 split of the train
    fold; winner refit on the whole train fold; MSE and R^2 on the test
    fold. With ``tune_first_fold_only`` the grid search runs on fold 0 and
    its winner is frozen for the remaining folds.
    """
    config.validate()
    if data.n < 2 * config.folds:
        raise DataError(
            f"need at least 2 rows per fold; n={data.n}, folds={config.folds}")
    started = time.perf_counter()
    grid = config.grid if config.grid is not None else default_grid(
        config.method, data.n, data.d)
    cells = _grid_cells(grid)
    plan = make_folds(data.n, config.folds, config.seed)
    seeds = np.random.SeedSequence(config.seed).spawn(config.folds)

    per_fold_mse, per_fold_r2, per_fold_hp = [], [], []
    frozen_hp = None
    for f in range(config.folds):
        train_ids, test_ids = plan.train_test(f)
        train, test = data.subset(train_ids), data.subset(test_ids)
        scaler = fit_standard_scaler(train)
        train_s = Dataset(scaler.transform(train.features), train.targets)
        fold_rng = np.random.Generator(np.random.PCG64(seeds[f]))
        weight_seed = int(fold_rng.integers(2**31))
        weights = (_train_fold_weights(train_s, weight_seed)
                   if config.uses_weights else None)

        if frozen_hp is not None:
            hp = _clamp_cell(config.method, frozen_hp, train_s.n, train_s.d)
        else:
            hp = _search_grid(config.method, train_s, cells, weights, fold_rng)
            if tune_first_fold_only:
                frozen_hp = hp
        model, predict_many = _fit_in_scaled_space(config.method, train_s, hp, weights)
        preds = predict_many(model, scaler.transform(test.features))
        mse = float(np.mean((preds - test.targets) ** 2))
        per_fold_mse.append(mse)
        per_fold_r2.append(_fold_r2(mse, test.targets))
        per_fold_hp.append(hp)

    return ResultReport(
        method=config.method,
        per_fold_mse=per_fold_mse,
        mean_mse=float(np.mean(per_fold_mse)),
        std_mse=float(np.std(per_fold_mse)),
        r2=float(np.mean(per_fold_r2)),
        per_fold_r2=per_fold_r2,
        best_hyperparameters=per_fold_hp[0],
        per_fold_hyperparameters=per_fold_hp,
        folds=config.folds,
        seed=config.seed,
        wall_time_s=time.perf_counter() - started,
    )


SWEEP_AXES = ("n_samples", "noise", "n_features")


@dataclass(frozen=True)
class SweepCell:
    axis: str
    value: float
    method: str
    report: ResultReport


@dataclass(frozen=True)
class SweepResult:
    axis: str
    cells: list[SweepCell]

    def as_rows(self, include_timing: bool = False) -> list[dict]:
        rows = []
        for c in self.cells:
            row = {"axis": c.axis, "value": c.value, "method": c.method}
            row.update(c.report.as_dict(include_timing))
            rows.append(row)
        return rows


def run_friedman_sweep(axis: str, values: list, methods: list[str],
                       seed: int = 0, folds: int = 5, n_samples: int = 5000,
                       n_features: int = 10, noise: float = 0.0,
                       grid: dict | None = None) -> SweepResult:
    """Sweep one generator axis of the Friedman-1 task across methods.

    Defaults follow the synthetic study: 5000 samples, 10 features, no
    noise, 5 folds, hyperparameters tuned on the first fold and frozen for
    the rest.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {', '.join(SWEEP_AXES)}")
    if not values:
        raise ConfigError("values must be non-empty")
    if not methods:
        raise ConfigError("methods must be non-empty")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    if grid is not None and len(set(methods)) > 1:
        raise ConfigError(
            "a custom grid applies to a single method; sweep methods"
            " separately or rely on the built-in grids")

    base = {"n_samples": n_samples, "n_features": n_features, "noise": noise}
    cells = []
    for value in values:
        params = dict(base)
        params[axis] = value
        n = int(params["n_samples"])
        d = int(params["n_features"])
        if axis == "n_samples" and n < 1:
            raise ConfigError("n_samples values must be positive")
        if axis == "n_features" and d < 5:
            raise ConfigError("n_features values must be at least 5")
        if axis == "noise" and params["noise"] < 0:
            raise ConfigError("noise values must be non-negative")
        data = friedman1(n, d, float(params["noise"]), seed=seed)
        for method in methods:
            report = run_experiment(
                data,
                ExperimentConfig(method=method, folds=folds, seed=seed, grid=grid),
                tune_first_fold_only=True,
            )
            cells.append(SweepCell(axis=axis, value=float(value),
                                   method=method, report=report))
    return SweepResult(axis=axis, cells=cells)


@dataclass(frozen=True)
class BoundSimSummary:
    n_train: int
    n_test: int
    k: int
    k_prime: int
    lipschitz: float
    seed: int
    violation_rate_dnnr: float
    violation_rate_knn: float
    spearman_dnnr: float
    spearman_knn: float
    mse_dnnr: float
    mse_knn: float
    mean_h: float
    mean_tau_local: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


_BOUND_COLUMNS = ("point_id", "h", "tau_local", "eps_dnnr", "eps_knn",
                  "abs_error", "abs_error_knn")


@dataclass(frozen=True)
class BoundSimResult:
    summary: BoundSimSummary
    rows: list[dict]

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_BOUND_COLUMNS)
            for row in self.rows:
                writer.writerow([
                    row["point_id"],
                    *(repr(float(row[c])) for c in _BOUND_COLUMNS[1:]),
                ])


def run_bound_sim(n_train: int = 10000, n_test: int = 2000, k: int = 7,
                  k_prime: int = 32, lipschitz: float = 40.0,
                  seed: int = 1) -> BoundSimResult:
    """Compare per-point error tolerances against realized errors.

    Fits DNNR and KNN on a noise-free Friedman-1 split, computes per-test-
    point tolerances, and reports violation rates plus the rank correlation
    between tolerance and actual error for each method. Rows come back
    sorted by eps_dnnr ascending.
    """
    if n_train < 2 or n_test < 1:
        raise ConfigError("need n_train >= 2 and n_test >= 1")
    if not (math.isfinite(lipschitz) and lipschitz > 0):
        raise ConfigError("lipschitz must be a positive finite number")
    full = friedman1(n_train + n_test, 10, 0.0, seed=seed)
    train = full.subset(np.arange(n_train))
    test = full.subset(np.arange(n_train, n_train + n_test))
    scaler = fit_standard_scaler(train)
    train_s = Dataset(scaler.transform(train.features), train.targets)
    test_x = scaler.transform(test.features)

    dnnr_model = fit_dnnr(train_s, DnnrConfig(k=k, k_prime=k_prime))
    knn_model = fit_knn(train_s, k)
    err_dnnr = np.abs(predict_dnnr_many(dnnr_model, test_x) - test.targets)
    err_knn = np.abs(predict_knn_many(knn_model, test_x) - test.targets)
    tol = pointwise_tolerances(dnnr_model, test_x, lipschitz)

    order = np.argsort(tol.eps_dnnr, kind="stable")
    rows = [
        {
            "point_id": int(i),
            "h": float(tol.h[i]),
            "tau_local": float(tol.tau_local[i]),
            "eps_dnnr": float(tol.eps_dnnr[i]),
            "eps_knn": float(tol.eps_knn[i]),
            "abs_error": float(err_dnnr[i]),
            "abs_error_knn": float(err_knn[i]),
        }
        for i in order
    ]

    def _spearman(a, b):
        if len(a) < 2:
            return 0.0
        rho = stats.spearmanr(a, b).statistic
        return float(rho) if math.isfinite(rho) else 0.0

    summary = BoundSimSummary(
        n_train=n_train, n_test=n_test, k=k, k_prime=k_prime,
        lipschitz=lipschitz, seed=seed,
        violation_rate_dnnr=float(np.mean(err_dnnr > tol.eps_dnnr)),
        violation_rate_knn=float(np.mean(err_knn > tol.eps_knn)),
        spearman_dnnr=_spearman(tol.eps_dnnr, err_dnnr),
        spearman_knn=_spearman(tol.eps_knn, err_knn),
        mse_dnnr=float(np.mean(err_dnnr**2)),
        mse_knn=float(np.mean(err_knn**2)),
        mean_h=float(np.mean(tol.h)),
        mean_tau_local=float(np.mean(tol.tau_local)),
    )
    return BoundSimResult(summary=summary, rows=rows)
