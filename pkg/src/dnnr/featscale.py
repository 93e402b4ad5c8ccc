"""Learning per-dimension metric weights by stochastic gradient descent.

The objective for a batch of row pairs (i, j) is the negative Pearson
correlation between the weighted squared distances d_w(X_i, X_j) and the
cross-prediction errors |Y_i - (Y_j + gamma_j . (X_i - X_j))|, where gamma_j
is fitted on j's neighborhood with both i and j excluded. Descending on it
pushes the metric to agree with how well points predict each other.

Because the local fits are scale-equivariant, the cross-prediction errors do
not depend on the weights once the neighbor sets are frozen; the gradient
therefore flows only through the distances and has the closed form used in
``_objective_and_grad``. Neighborhoods are refreshed once per epoch under the
current weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import ConfigError
from .nnindex import ScalingWeights, build_index, query, query_many
from .predictor import DnnrConfig, fit_dnnr, predict_dnnr_many

_VARIANCE_FLOOR = 1e-24


@dataclass(frozen=True)
class ScaleTrainConfig:
    """Settings for the weight trainer.

    ``k_prime`` is the neighborhood size of the inner cross-prediction fits
    and of the validation model; ``k_val`` is the anchor count used when
    scoring candidate weights on the held-out rows.
    """

    epochs: int = 25
    batch_pairs: int = 256
    learning_rate: float = 0.1
    k_prime: int = 32
    seed: int = 0
    val_fraction: float = 0.2
    k_val: int = 3

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_pairs < 3:
            raise ConfigError("batch_pairs must be >= 3 for a usable correlation")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must lie in (0, 1)")
        if self.k_prime < 1 or self.k_val < 1:
            raise ConfigError("k_prime and k_val must be >= 1")


@dataclass(frozen=True)
class ScaleTrainReport:
    """Outcome of a training run.

    ``best_epoch`` indexes the validation history: 0 is the all-ones
    initialization, e >= 1 the weights after epoch e. ``final_weights``
    always corresponds to ``best_epoch``.
    """

    final_weights: ScalingWeights
    loss_history: list[float]
    best_epoch: int
    val_history: list[float]
    degenerate_batches: int = 0
    skipped_steps: int = 0


def _min_norm_gamma(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    cutoff = np.finfo(np.float64).eps * max(a.shape[-2], a.shape[-1]) * s[..., :1]
    s_inv = np.where(s > cutoff, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    utb = np.einsum("...mr,...m->...r", u, b)
    return np.einsum("...rp,...r->...p", vt, s_inv * utb)


def _cross_errors(features: np.ndarray, targets: np.ndarray,
                  pair_i: np.ndarray, pair_j: np.ndarray,
                  fit_sets: np.ndarray) -> np.ndarray:
    """|Y_i - Taylor_j(X_i)| for each pair, with gamma_j fitted on fit_sets."""
    dx = features[fit_sets] - features[pair_j, None, :]
    dy = targets[fit_sets] - targets[pair_j, None]
    gamma = _min_norm_gamma(dx, dy)
    delta = features[pair_i] - features[pair_j]
    pred = targets[pair_j] + np.einsum("bd,bd->b", gamma, delta)
    return np.abs(targets[pair_i] - pred)


def _objective_and_grad(weights: np.ndarray, delta_sq: np.ndarray,
                        errors: np.ndarray):
    """Negative Pearson correlation and its gradient in the weights.

    delta_sq holds the squared per-dimension pair differences, so the
    distances are d_p = sum_l w_l^2 delta_sq[p, l]. Returns (objective,
    gradient, degenerate).
    """
    dist = delta_sq @ (weights * weights)
    d_c = dist - dist.mean()
    e_c = errors - errors.mean()
    a = float(d_c @ d_c)
    b = float(e_c @ e_c)
    if a < _VARIANCE_FLOOR or b < _VARIANCE_FLOOR:
        return 0.0, np.zeros_like(weights), True
    c = float(d_c @ e_c)
    denom = np.sqrt(a * b)
    corr = c / denom
    dcorr_ddist = e_c / denom - corr * d_c / a
    grad = -2.0 * weights * (dcorr_ddist @ delta_sq)
    return -corr, grad, False


def pairwise_objective(weights: ScalingWeights, data: Dataset,
                       pair_set, k_prime: int) -> float:
    """Negative correlation between pair distances and cross-prediction errors.

    Each pair (i, j) contributes the weighted squared distance between the
    two rows and the error of predicting Y_i from anchor j's local model,
    fitted on the k_prime nearest rows excluding both i and j. Degenerate
    batches (no variance in either series) return 0.0.
    """
    pairs = np.asarray(list(pair_set), dtype=np.int64).reshape(-1, 2)
    if pairs.shape[0] < 3:
        raise ConfigError("need at least 3 pairs")
    if np.any(pairs[:, 0] == pairs[:, 1]):
        raise ConfigError("pairs must have i != j")
    index = build_index(data.features, weights)
    fit_sets = np.empty((pairs.shape[0], k_prime), dtype=np.int64)
    for p, (i, j) in enumerate(pairs):
        fit_sets[p] = query(index, data.features[j], k_prime,
                            exclude={int(i), int(j)}).indices
    errors = _cross_errors(data.features, data.targets,
                           pairs[:, 0], pairs[:, 1], fit_sets)
    delta = data.features[pairs[:, 0]] - data.features[pairs[:, 1]]
    obj, _, _ = _objective_and_grad(weights.weights, delta * delta, errors)
    return float(obj)


def _validation_mse(train: Dataset, val_x: np.ndarray, val_y: np.ndarray,
                    w: np.ndarray, config: ScaleTrainConfig) -> float:
    k_prime = min(config.k_prime, train.n - 1)
    model = fit_dnnr(
        train,
        DnnrConfig(k=min(config.k_val, train.n), k_prime=k_prime),
        ScalingWeights(w.copy()),
    )
    pred = predict_dnnr_many(model, val_x)
    return float(np.mean((pred - val_y) ** 2))


def train_weights(data: Dataset, config: ScaleTrainConfig) -> ScaleTrainReport:
    """Learn metric weights on the data, selecting the epoch by validation.

    Weights start at all ones, every step projects them back to >= 0, and
    the candidate (including the untouched initialization) with the lowest
    validation MSE wins.
    """
    config.validate()
    if data.n < 4 * config.k_prime:
        raise ConfigError(
            f"need n >= 4 * k_prime rows to train weights; got n={data.n},"
            f" k_prime={config.k_prime}"
        )
    rng = np.random.Generator(np.random.PCG64(config.seed))
    order = rng.permutation(data.n)
    n_val = max(1, int(round(config.val_fraction * data.n)))
    val_rows, train_rows = order[:n_val], order[n_val:]
    train = data.subset(train_rows)
    val_x, val_y = data.features[val_rows], data.targets[val_rows]
    n_t = train.n
    k_prime = min(config.k_prime, n_t - 2)

    w = np.ones(data.d)
    candidates = [w.copy()]
    val_history = [_validation_mse(train, val_x, val_y, w, config)]
    loss_history: list[float] = []
    degenerate = 0
    skipped = 0

    steps_per_epoch = max(1, n_t // config.batch_pairs)
    for _ in range(config.epochs):
        index = build_index(train.features, ScalingWeights(w.copy()))
        hoods, _ = query_many(index, train.features, k_prime + 1,
                              exclude_self=np.arange(n_t))
        epoch_objs = []
        for _ in range(steps_per_epoch):
            anchors = rng.integers(0, n_t, size=config.batch_pairs)
            pick = rng.integers(0, k_prime, size=config.batch_pairs)
            others = hoods[anchors, pick]
            # Leave the picked row out of the fit by swapping in the spare
            # (k'+1)-th neighbor, keeping every fit set the same size.
            fit_sets = hoods[anchors].copy()
            fit_sets[np.arange(config.batch_pairs), pick] = hoods[anchors, k_prime]
            fit_sets = fit_sets[:, :k_prime]
            errors = _cross_errors(train.features, train.targets,
                                   others, anchors, fit_sets)
            delta = train.features[others] - train.features[anchors]
            obj, grad, degen = _objective_and_grad(w, delta * delta, errors)
            if degen:
                degenerate += 1
                continue
            if not np.all(np.isfinite(grad)):
                skipped += 1
                continue
            epoch_objs.append(obj)
            if config.learning_rate > 0:
                w = np.maximum(w - config.learning_rate * grad, 0.0)
        loss_history.append(float(np.mean(epoch_objs)) if epoch_objs else 0.0)
        candidates.append(w.copy())
        val_history.append(_validation_mse(train, val_x, val_y, w, config))

    best = int(np.argmin(val_history))
    return ScaleTrainReport(
        final_weights=ScalingWeights(candidates[best]),
        loss_history=loss_history,
        best_epoch=best,
        val_history=val_history,
        degenerate_batches=degenerate,
        skipped_steps=skipped,
    )
