"""HTTP service exposing the regression library.

``create_app`` builds a self-contained FastAPI application with an
in-memory model registry. Fitted models can be exported as JSON bundles
(training data, scaler statistics, learned weights, hyperparameters) and
imported back, which is how the command-line client persists models across
invocations.

Library errors map onto a stable envelope: config mistakes return 400 and
data problems 422, both with a body of the form
``{"error": {"type": "config" | "data", "message": ...}}``.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..dataset import Dataset, StandardScaler, friedman1
from ..errors import ConfigError, DataError, DnnrError
from ..experiments import (METHODS, ExperimentConfig, FittedMethod,
                           fit_method, rebuild_method,
                           resolve_hyperparameters, run_bound_sim,
                           run_experiment, run_friedman_sweep)
from ..inspection import collect_relevance, export_traces, trace_queries
from ..nnindex import ScalingWeights
from ..predictor import DnnrModel
from .schemas import (BoundsRequest, BundleEnvelope, DatasetResponse,
                      EvaluateRequest, Friedman1Request, FitRequest,
                      InspectRequest, ModelInfo, PredictRequest,
                      PredictResponse, SweepRequest)

BUNDLE_FORMAT = 1


@dataclass
class RegisteredModel:
    model_id: str
    fitted: FittedMethod
    bundle: dict

    def info(self) -> ModelInfo:
        b = self.bundle
        return ModelInfo(
            model_id=self.model_id,
            method=b["method"],
            n=len(b["targets"]),
            d=len(b["features"][0]),
            hyperparameters=b["hyperparameters"],
            weights=b["weights"],
            column_names=b["column_names"],
            target_name=b["target_name"],
        )


def _as_points(rows: list[list[float]], d: int | None = None) -> np.ndarray:
    try:
        pts = np.asarray(rows, dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"expected equal-length numeric rows: {exc}") from exc
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
        raise DataError("expected a non-empty list of equal-length rows")
    if d is not None and pts.shape[1] != d:
        raise DataError(f"rows have {pts.shape[1]} columns, model expects {d}")
    if not np.all(np.isfinite(pts)):
        raise DataError("rows contain non-finite values")
    return pts


def _build_dataset(features, targets, column_names=None, target_name=None) -> Dataset:
    try:
        x = np.asarray(features, dtype=np.float64)
        y = np.asarray(targets, dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"features rows must be equal-length: {exc}") from exc
    if x.ndim != 2:
        raise DataError("features must be a list of equal-length rows")
    return Dataset(x, y, column_names=column_names,
                   target_name=target_name or "y")


def _make_bundle(req: FitRequest, fitted: FittedMethod) -> dict:
    return {
        "format_version": BUNDLE_FORMAT,
        "method": fitted.method,
        "hyperparameters": fitted.hyperparameters,
        "seed": req.seed,
        "scale_features": req.scale_features,
        "column_names": req.column_names,
        "target_name": req.target_name or "y",
        "features": [[float(v) for v in row] for row in req.features],
        "targets": [float(v) for v in req.targets],
        "weights": None if fitted.weights is None
        else [float(w) for w in fitted.weights.weights],
        "scaler": {
            "means": [float(v) for v in fitted.scaler.means],
            "stds": [float(v) for v in fitted.scaler.stds],
        },
    }


def _restore_bundle(bundle: dict) -> tuple[FittedMethod, dict]:
    if not isinstance(bundle, dict):
        raise ConfigError("bundle must be a JSON object")
    if bundle.get("format_version") != BUNDLE_FORMAT:
        raise ConfigError(
            f"unsupported bundle format {bundle.get('format_version')!r};"
            f" expected {BUNDLE_FORMAT}")
    for key in ("method", "hyperparameters", "features", "targets", "scaler"):
        if key not in bundle:
            raise ConfigError(f"bundle is missing field {key!r}")
    method = bundle["method"]
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r} in bundle")
    data = _build_dataset(bundle["features"], bundle["targets"],
                          column_names=bundle.get("column_names"),
                          target_name=bundle.get("target_name"))
    scaler_info = bundle["scaler"]
    scaler = StandardScaler(
        means=np.asarray(scaler_info["means"], dtype=np.float64),
        stds=np.asarray(scaler_info["stds"], dtype=np.float64),
    )
    weights = None
    if bundle.get("weights") is not None:
        weights = ScalingWeights(np.asarray(bundle["weights"], dtype=np.float64))
    hp = resolve_hyperparameters(method, bundle["hyperparameters"], data.n, data.d)
    fitted = rebuild_method(method, data, hp, scaler, weights)
    return fitted, bundle


def create_app() -> FastAPI:
    """Build the service with a fresh, empty model registry."""
    app = FastAPI(title="dnnr service", version=__version__)
    registry: dict[str, RegisteredModel] = {}
    app.state.registry = registry

    @app.exception_handler(DnnrError)
    async def _library_error(request, exc):
        kind = "data" if isinstance(exc, DataError) else "config"
        return JSONResponse(
            status_code=422 if kind == "data" else 400,
            content={"error": {"type": kind, "message": str(exc)}},
        )

    @app.exception_handler(RequestValidationError)
    async def _request_error(request, exc):
        return JSONResponse(
            status_code=400,
            content={"error": {"type": "config", "message": str(exc)}},
        )

    def _get(model_id: str) -> RegisteredModel:
        entry = registry.get(model_id)
        if entry is None:
            raise ConfigError(f"unknown model id {model_id!r}")
        return entry

    def _register(fitted: FittedMethod, bundle: dict) -> RegisteredModel:
        entry = RegisteredModel(model_id=uuid.uuid4().hex[:12], fitted=fitted,
                                bundle=bundle)
        registry[entry.model_id] = entry
        return entry

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.get("/methods")
    async def methods():
        return {"methods": list(METHODS)}

    @app.post("/models", response_model=ModelInfo)
    async def fit(req: FitRequest) -> ModelInfo:
        data = _build_dataset(req.features, req.targets,
                              column_names=req.column_names,
                              target_name=req.target_name)
        hp = resolve_hyperparameters(req.method, req.hyperparameters, data.n, data.d)
        fitted = fit_method(req.method, data, hp,
                            scale_features=req.scale_features, seed=req.seed)
        entry = _register(fitted, _make_bundle(req, fitted))
        return entry.info()

    @app.get("/models/{model_id}", response_model=ModelInfo)
    async def model_info(model_id: str) -> ModelInfo:
        return _get(model_id).info()

    @app.delete("/models/{model_id}")
    async def delete_model(model_id: str):
        _get(model_id)
        del registry[model_id]
        return {"deleted": model_id}

    @app.get("/models/{model_id}/export", response_model=BundleEnvelope)
    async def export_model(model_id: str) -> BundleEnvelope:
        return BundleEnvelope(bundle=_get(model_id).bundle)

    @app.post("/models/import", response_model=ModelInfo)
    async def import_model(req: BundleEnvelope) -> ModelInfo:
        fitted, bundle = _restore_bundle(req.bundle)
        entry = _register(fitted, bundle)
        return entry.info()

    @app.post("/models/{model_id}/predict", response_model=PredictResponse)
    async def predict(model_id: str, req: PredictRequest) -> PredictResponse:
        entry = _get(model_id)
        queries = _as_points(req.queries, d=len(entry.bundle["features"][0]))
        preds = entry.fitted.predict(queries)
        return PredictResponse(predictions=[float(p) for p in preds])

    @app.post("/models/{model_id}/inspect")
    async def inspect(model_id: str, req: InspectRequest):
        entry = _get(model_id)
        if not isinstance(entry.fitted.model, DnnrModel):
            raise ConfigError(
                "inspection requires a dnnr-family model,"
                f" got {entry.fitted.method!r}")
        model = entry.fitted.model
        queries = _as_points(req.queries, d=model.data.d)
        queries_s = entry.fitted.scaler.transform(queries)

        summary = collect_relevance(model, queries_s)
        per_dimension = [
            {
                "dimension": j,
                "count": int(len(v)),
                "median": float(np.median(v)),
                "p25": float(np.percentile(v, 25)),
                "p75": float(np.percentile(v, 75)),
            }
            for j, v in enumerate(summary.per_dimension)
        ]
        out = {
            "relevance": {
                "dimension_ranks": [int(r) for r in summary.dimension_ranks],
                "per_dimension": per_dimension,
            },
            "selected_dimensions": None,
            "traces": None,
        }
        if req.keep is not None:
            if not 1 <= req.keep <= summary.d:
                raise ConfigError(f"keep={req.keep} out of range [1, {summary.d}]")
            out["selected_dimensions"] = sorted(
                int(r) for r in summary.dimension_ranks[:req.keep])
        if req.include_traces:
            dims = req.dims if req.dims is not None else (0, min(1, model.data.d - 1))
            traces = trace_queries(model, queries_s)
            true_targets = None
            if req.targets is not None:
                if len(req.targets) != len(traces):
                    raise DataError("targets length must match queries")
                true_targets = np.asarray(req.targets, dtype=np.float64)
            out["traces"] = export_traces(traces, dims, true_targets=true_targets)
        return out

    @app.post("/evaluate")
    async def evaluate(req: EvaluateRequest):
        data = _build_dataset(req.features, req.targets)
        config = ExperimentConfig(method=req.method, folds=req.folds,
                                  seed=req.seed, grid=req.grid,
                                  scale_features=req.scale_features)
        report = run_experiment(data, config)
        return report.as_dict(include_timing=True)

    @app.post("/sweep")
    async def sweep(req: SweepRequest):
        result = run_friedman_sweep(
            req.axis, list(req.values), list(req.methods), seed=req.seed,
            folds=req.folds, n_samples=req.n_samples,
            n_features=req.n_features, noise=req.noise, grid=req.grid)
        return {"axis": result.axis, "rows": result.as_rows(include_timing=True)}

    @app.post("/bounds")
    async def bounds(req: BoundsRequest):
        result = run_bound_sim(n_train=req.n_train, n_test=req.n_test, k=req.k,
                               k_prime=req.k_prime, lipschitz=req.lipschitz,
                               seed=req.seed)
        return {
            "summary": result.summary.as_dict(),
            "rows": result.rows if req.include_rows else None,
        }

    @app.post("/datasets/friedman1", response_model=DatasetResponse)
    async def gen_friedman1(req: Friedman1Request) -> DatasetResponse:
        if req.n_samples < 1:
            raise ConfigError("n_samples must be positive")
        if req.n_features < 5:
            raise ConfigError("n_features must be at least 5")
        if req.noise < 0:
            raise ConfigError("noise must be non-negative")
        data = friedman1(req.n_samples, req.n_features, req.noise, seed=req.seed)
        return DatasetResponse(
            features=[[float(v) for v in row] for row in data.features],
            targets=[float(v) for v in data.targets],
            column_names=list(data.column_names),
            target_name=data.target_name,
        )

    return app
