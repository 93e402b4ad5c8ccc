"""Request and response models for the HTTP service.

Validation here covers JSON structure and primitive types; numeric and
statistical validity (finiteness, shape agreement, feasible neighbor
counts) stays in the core library, whose errors the app maps onto the
config/data error envelope.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FitRequest(_Strict):
    method: str
    features: list[list[float]]
    targets: list[float]
    column_names: list[str] | None = None
    target_name: str | None = None
    hyperparameters: dict[str, int | float] = {}
    scale_features: bool | None = None
    seed: int = 0


class ModelInfo(_Strict):
    model_id: str
    method: str
    n: int
    d: int
    hyperparameters: dict[str, int | float]
    weights: list[float] | None = None
    column_names: list[str] | None = None
    target_name: str | None = None


class PredictRequest(_Strict):
    queries: list[list[float]]


class PredictResponse(_Strict):
    predictions: list[float]


class EvaluateRequest(_Strict):
    method: str
    features: list[list[float]]
    targets: list[float]
    folds: int = 10
    seed: int = 0
    grid: dict[str, list[int | float]] | None = None
    scale_features: bool | None = None


class SweepRequest(_Strict):
    axis: str
    values: list[float]
    methods: list[str]
    seed: int = 0
    folds: int = 5
    n_samples: int = 5000
    n_features: int = 10
    noise: float = 0.0
    grid: dict[str, list[int | float]] | None = None


class BoundsRequest(_Strict):
    n_train: int = 10000
    n_test: int = 2000
    k: int = 7
    k_prime: int = 32
    lipschitz: float = 40.0
    seed: int = 1
    include_rows: bool = True


class InspectRequest(_Strict):
    queries: list[list[float]]
    targets: list[float] | None = None
    dims: tuple[int, int] | None = None
    keep: int | None = None
    include_traces: bool = True


class Friedman1Request(_Strict):
    n_samples: int = 5000
    n_features: int = 10
    noise: float = 0.0
    seed: int = 0


class DatasetResponse(_Strict):
    features: list[list[float]]
    targets: list[float]
    column_names: list[str]
    target_name: str


class BundleEnvelope(_Strict):
    bundle: dict
