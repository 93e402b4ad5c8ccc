"""Differential nearest neighbor regression with learned feature scaling,
error-bound diagnostics, and a benchmark harness."""

from .dataset import (
    Dataset,
    FoldPlan,
    StandardScaler,
    fit_standard_scaler,
    friedman1,
    load_csv,
    make_folds,
    write_csv,
)
from .errors import ConfigError, DataError, DnnrError
from .experiments import (
    METHODS,
    ExperimentConfig,
    FittedMethod,
    ResultReport,
    default_grid,
    fit_method,
    run_bound_sim,
    run_experiment,
    run_friedman_sweep,
    sample_kprime_grid,
)
from .featscale import ScaleTrainConfig, ScaleTrainReport, train_weights
from .gradient import LocalModel, fit_local, fit_local_lasso, taylor_predict
from .inspection import (
    RelevanceSummary,
    collect_relevance,
    drop_variables,
    export_traces,
    select_variables,
    trace_queries,
    write_relevance_csv,
)
from .nnindex import NeighborSet, ScalingWeights, build_index, query
from .predictor import (
    DnnrConfig,
    DnnrModel,
    PredictionTrace,
    fit_dnnr,
    fit_knn,
    fit_ll,
    predict_dnnr,
    predict_dnnr_many,
    predict_dnnr_traced,
    predict_knn,
    predict_knn_many,
    predict_ll,
    predict_ll_many,
)
from .theory import (
    BallMassEstimate,
    BoundInputs,
    BoundReport,
    PointwiseTolerances,
    TauEstimate,
    ball_mass_estimate,
    estimate_tau,
    gradient_error_bound,
    guarantee_conditions,
    pointwise_tolerances,
    uniform_cube_ball_mass,
)

__version__ = "0.1.0"

__all__ = [
    "BallMassEstimate",
    "BoundInputs",
    "BoundReport",
    "ConfigError",
    "DataError",
    "Dataset",
    "DnnrConfig",
    "DnnrError",
    "DnnrModel",
    "ExperimentConfig",
    "FittedMethod",
    "FoldPlan",
    "LocalModel",
    "METHODS",
    "NeighborSet",
    "PointwiseTolerances",
    "PredictionTrace",
    "RelevanceSummary",
    "ResultReport",
    "ScaleTrainConfig",
    "ScaleTrainReport",
    "ScalingWeights",
    "StandardScaler",
    "TauEstimate",
    "ball_mass_estimate",
    "build_index",
    "collect_relevance",
    "default_grid",
    "drop_variables",
    "estimate_tau",
    "export_traces",
    "fit_dnnr",
    "fit_knn",
    "fit_ll",
    "fit_local",
    "fit_local_lasso",
    "fit_method",
    "fit_standard_scaler",
    "friedman1",
    "gradient_error_bound",
    "guarantee_conditions",
    "load_csv",
    "make_folds",
    "pointwise_tolerances",
    "predict_dnnr",
    "predict_dnnr_many",
    "predict_dnnr_traced",
    "predict_knn",
    "predict_knn_many",
    "predict_ll",
    "predict_ll_many",
    "query",
    "run_bound_sim",
    "run_experiment",
    "run_friedman_sweep",
    "sample_kprime_grid",
    "select_variables",
    "taylor_predict",
    "trace_queries",
    "train_weights",
    "uniform_cube_ball_mass",
    "write_csv",
    "write_relevance_csv",
]
