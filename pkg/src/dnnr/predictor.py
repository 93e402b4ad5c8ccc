"""Regression engines: differential nearest neighbors, plain k-nearest
averaging, and local-linear fitting, all under an optional weighted metric.

A differential prediction averages, over the query's k nearest anchors, each
anchor's Taylor expansion evaluated at the query, then clips to the training
target range. Gradients are fitted in the coordinates the features arrive in;
the weights influence only which rows count as neighbors, which keeps
predictions invariant under per-dimension rescaling of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import ConfigError
from .gradient import LocalModel, fit_local_batch, lasso_cd_batch
from .nnindex import ScalingWeights, build_index, query_many

_SCALING_MODES = ("identity", "learned")


@dataclass(frozen=True)
class DnnrConfig:
    """Hyperparameters of a differential nearest-neighbor model.

    Parameters
    ----------
    k : anchors averaged per query
    k_prime : neighbors used to fit each anchor's derivatives
    order : 1 for gradients, 2 to add diagonal second derivatives
    lasso_lambda : optional L1 penalty on the gradient fits
    clip : clamp predictions to the training target range
    scaling : "identity" or "learned"; bookkeeping for how the weights arose
    normalize_rows : fit unit-direction designs instead of raw differences
    zero_gradient : diagnostic switch that forces every gradient to zero,
        collapsing the model onto plain k-nearest averaging
    """

    k: int = 3
    k_prime: int = 32
    order: int = 1
    lasso_lambda: float | None = None
    clip: bool = True
    scaling: str = "identity"
    normalize_rows: bool = False
    zero_gradient: bool = False

    def validate(self, d: int, n: int) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.order not in (1, 2):
            raise ConfigError(f"order must be 1 or 2, got {self.order}")
        if self.k_prime < d * self.order:
            raise ConfigError(
                f"k_prime={self.k_prime} is below the minimum {d * self.order}"
                f" for d={d}, order={self.order}"
            )
        if self.lasso_lambda is not None and self.lasso_lambda < 0:
            raise ConfigError("lasso_lambda must be >= 0")
        if self.scaling not in _SCALING_MODES:
            raise ConfigError(f"scaling must be one of {_SCALING_MODES}")
        if self.lasso_lambda is not None and self.order == 2:
            raise ConfigError("lasso_lambda is only supported for order 1")
        if n < self.k or n < self.k_prime + 1:
            raise ConfigError(
                f"insufficient samples: need n >= k and n > k_prime;"
                f" got n={n}, k={self.k}, k_prime={self.k_prime}"
            )


@dataclass(frozen=True)
class PredictionTrace:
    """Audit record of one differential prediction.

    ``per_neighbor_relevance`` holds, per anchor, |(x - x_m) * gamma_m|
    element-wise. ``anchor_points`` and ``fit_neighbor_points`` carry the
    coordinates needed to redraw the prediction's neighborhood externally.
    """

    query: np.ndarray
    neighbor_ids: np.ndarray
    per_neighbor_estimates: np.ndarray
    per_neighbor_relevance: np.ndarray
    raw_mean: float
    clipped: float
    was_clipped: bool
    anchor_points: np.ndarray
    fit_neighbor_points: list = field(default_factory=list)


class DnnrModel:
    """Fitted differential nearest-neighbor regressor.

    Local derivative fits are computed lazily per anchor and cached, since
    anchors recur across overlapping query neighborhoods and the fits do not
    depend on the query. The fill is idempotent, so concurrent first
    computation is safe.
    """

    def __init__(self, data: Dataset, config: DnnrConfig, weights: ScalingWeights):
        self.data = data
        self.config = config
        self.weights = weights
        self.index = build_index(data.features, weights)
        d = data.d
        self._gamma = np.zeros((data.n, d))
        self._hess = np.zeros((data.n, d)) if config.order == 2 else None
        self._sigma_min = np.zeros(data.n)
        self._dir_sigma_min = np.zeros(data.n)
        self._h_max = np.zeros(data.n)
        self._nu_l1 = np.zeros((data.n, config.k_prime))
        self._fit_neighbors = np.zeros((data.n, config.k_prime), dtype=np.int64)
        self._fitted = np.zeros(data.n, dtype=bool)

    def ensure_local_fits(self, anchor_ids: np.ndarray) -> None:
        """Fit and cache local models for any anchors that lack one."""
        need = np.unique(anchor_ids)
        need = need[~self._fitted[need]]
        if need.size == 0:
            return
        cfg = self.config
        nb_ids, _ = query_many(self.index, self.data.features[need], cfg.k_prime,
                               exclude_self=need)
        if cfg.zero_gradient:
            fits = None
        elif cfg.lasso_lambda is not None:
            dx = self.data.features[nb_ids] - self.data.features[need, None, :]
            dy = self.data.targets[nb_ids] - self.data.targets[need, None]
            h = np.linalg.norm(dx, axis=-1)
            zero = h <= 0.0
            dx = np.where(zero[..., None], 0.0, dx)
            dy = np.where(zero, 0.0, dy)
            gamma = lasso_cd_batch(dx, dy, float(cfg.lasso_lambda))
            h_safe = np.where(zero, 1.0, h)
            nu = np.where(zero[..., None], 0.0, dx / h_safe[..., None])
            self._gamma[need] = gamma
            self._sigma_min[need] = np.linalg.svd(dx, compute_uv=False)[..., -1]
            self._dir_sigma_min[need] = np.linalg.svd(nu, compute_uv=False)[..., -1]
            self._h_max[need] = h.max(axis=-1)
            self._nu_l1[need] = np.abs(nu).sum(axis=-1)
            self._fit_neighbors[need] = nb_ids
            self._fitted[need] = True
            return
        else:
            fits = fit_local_batch(
                self.data.features, self.data.targets, need, nb_ids,
                order=cfg.order, normalize_rows=cfg.normalize_rows,
            )
        if fits is not None:
            self._gamma[need] = fits.gamma
            if self._hess is not None:
                self._hess[need] = fits.hess_diag
            self._sigma_min[need] = fits.sigma_min
            self._dir_sigma_min[need] = fits.direction_sigma_min
            self._h_max[need] = fits.h_max
            self._nu_l1[need] = fits.direction_l1_norms
        self._fit_neighbors[need] = nb_ids
        self._fitted[need] = True

    def local_model(self, anchor_id: int) -> LocalModel:
        """The cached derivative record for one training row."""
        self.ensure_local_fits(np.array([anchor_id]))
        m = int(anchor_id)
        return LocalModel(
            anchor_id=m,
            gamma=self._gamma[m],
            hess_diag=None if self._hess is None else self._hess[m],
            sigma_min=float(self._sigma_min[m]),
            h_max=float(self._h_max[m]),
            residual_norm=float("nan"),
            neighbor_ids=self._fit_neighbors[m],
            direction_l1_norms=self._nu_l1[m],
            direction_sigma_min=float(self._dir_sigma_min[m]),
        )


def fit_dnnr(data: Dataset, config: DnnrConfig,
             weights: ScalingWeights | None = None) -> DnnrModel:
    """Validate the configuration against the dataset and build the model.

    Derivative fits happen on demand at prediction time. No anchor's fit ever
    sees its own target: each uses its k' nearest other rows.
    """
    config.validate(data.d, data.n)
    if weights is None:
        weights = ScalingWeights.identity(data.d)
    if weights.d != data.d:
        raise ConfigError("weights dimension does not match dataset")
    return DnnrModel(data, config, weights)


def _clip(values: np.ndarray, bounds: tuple[float, float]) -> np.ndarray:
    return np.clip(values, bounds[0], bounds[1])


def predict_dnnr_many(model: DnnrModel, queries: np.ndarray) -> np.ndarray:
    """Vectorized prediction for a (B, d) batch of query points."""
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2:
        raise ConfigError("queries must be (B, d)")
    cfg = model.config
    anchor_ids, _ = query_many(model.index, queries, cfg.k)
    model.ensure_local_fits(anchor_ids.ravel())
    estimates = _anchor_estimates(model, queries, anchor_ids)
    raw = estimates.mean(axis=1)
    if cfg.clip:
        return _clip(raw, model.data.target_bounds)
    return raw


def _anchor_estimates(model: DnnrModel, queries: np.ndarray,
                      anchor_ids: np.ndarray) -> np.ndarray:
    """Per-anchor Taylor estimates, shape (B, k)."""
    delta = queries[:, None, :] - model.data.features[anchor_ids]
    estimates = model.data.targets[anchor_ids] + np.einsum(
        "bkd,bkd->bk", model._gamma[anchor_ids], delta
    )
    if model._hess is not None:
        estimates = estimates + 0.5 * np.einsum(
            "bkd,bkd->bk", model._hess[anchor_ids], delta * delta
        )
    return estimates


def predict_dnnr(model: DnnrModel, x: np.ndarray) -> float:
    """Predict at a single point."""
    return float(predict_dnnr_many(model, np.asarray(x, dtype=np.float64)[None, :])[0])


def predict_dnnr_traced(model: DnnrModel, x: np.ndarray) -> PredictionTrace:
    """Predict at a single point and capture the full audit trail."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    cfg = model.config
    anchor_ids, _ = query_many(model.index, x[None, :], cfg.k)
    model.ensure_local_fits(anchor_ids.ravel())
    estimates = _anchor_estimates(model, x[None, :], anchor_ids)[0]
    anchor_ids = anchor_ids[0]
    delta = x[None, :] - model.data.features[anchor_ids]
    relevance = np.abs(delta * model._gamma[anchor_ids])
    raw = float(np.mean(estimates))
    clipped = float(_clip(np.array([raw]), model.data.target_bounds)[0]) if cfg.clip else raw
    return PredictionTrace(
        query=x,
        neighbor_ids=anchor_ids,
        per_neighbor_estimates=estimates,
        per_neighbor_relevance=relevance,
        raw_mean=raw,
        clipped=clipped,
        was_clipped=clipped != raw,
        anchor_points=model.data.features[anchor_ids],
        fit_neighbor_points=[
            model.data.features[model._fit_neighbors[m]] for m in anchor_ids
        ],
    )


class KnnModel:
    """Plain k-nearest averaging under the given metric."""

    def __init__(self, data: Dataset, k: int, weights: ScalingWeights):
        self.data = data
        self.k = k
        self.weights = weights
        self.index = build_index(data.features, weights)


def fit_knn(data: Dataset, k: int, weights: ScalingWeights | None = None) -> KnnModel:
    if not 1 <= k <= data.n:
        raise ConfigError(f"k={k} out of range for n={data.n}")
    if weights is None:
        weights = ScalingWeights.identity(data.d)
    return KnnModel(data, k, weights)


def predict_knn_many(model: KnnModel, queries: np.ndarray) -> np.ndarray:
    queries = np.asarray(queries, dtype=np.float64)
    anchor_ids, _ = query_many(model.index, queries, model.k)
    return model.data.targets[anchor_ids].mean(axis=1)


def predict_knn(model: KnnModel, x: np.ndarray) -> float:
    return float(predict_knn_many(model, np.asarray(x, dtype=np.float64)[None, :])[0])


class LlModel:
    """Local-linear regression: one hyperplane per query neighborhood."""

    def __init__(self, data: Dataset, k_region: int, weights: ScalingWeights,
                 clip: bool = True):
        self.data = data
        self.k_region = k_region
        self.weights = weights
        self.clip = clip
        self.index = build_index(data.features, weights)


def fit_ll(data: Dataset, k_region: int, weights: ScalingWeights | None = None,
           clip: bool = True) -> LlModel:
    if k_region < data.d + 1:
        raise ConfigError(
            f"k_region must be >= d + 1 = {data.d + 1}, got {k_region}"
        )
    if k_region > data.n:
        raise ConfigError(f"k_region={k_region} exceeds n={data.n}")
    if weights is None:
        weights = ScalingWeights.identity(data.d)
    return LlModel(data, k_region, weights, clip=clip)


def predict_ll_many(model: LlModel, queries: np.ndarray) -> np.ndarray:
    """Fit an intercept-plus-slopes plane to each query's neighborhood.

    The design is centered at the query, so the prediction is simply the
    fitted intercept and the solve stays well conditioned.
    """
    queries = np.asarray(queries, dtype=np.float64)
    nb_ids, _ = query_many(model.index, queries, model.k_region)
    dx = model.data.features[nb_ids] - queries[:, None, :]
    ones = np.ones(dx.shape[:2] + (1,))
    a = np.concatenate([ones, dx], axis=-1)
    b = model.data.targets[nb_ids]
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    cutoff = np.finfo(np.float64).eps * max(a.shape[-2], a.shape[-1]) * s[..., :1]
    s_inv = np.where(s > cutoff, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    utb = np.einsum("bmr,bm->br", u, b)
    coef = np.einsum("brp,br->bp", vt, s_inv * utb)
    pred = coef[:, 0]
    if model.clip:
        return _clip(pred, model.data.target_bounds)
    return pred


def predict_ll(model: LlModel, x: np.ndarray) -> float:
    return float(predict_ll_many(model, np.asarray(x, dtype=np.float64)[None, :])[0])
