"""Local derivative estimation at an anchor point from its neighbors.

The default fit solves the unnormalized least-squares problem

    min_g || (X_nb - x_m) g - (y_nb - y_m) ||_2

with no intercept: differencing against the anchor fixes the constant term
at y_m. A row-normalized variant (each difference divided by its length) is
available behind ``normalize_rows`` for diagnostics whose guarantees are
stated for unit-direction designs. An L1-regularized variant is solved by
cyclic coordinate descent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

_LASSO_TOL = 1e-8
_LASSO_MAX_SWEEPS = 10_000


@dataclass(frozen=True)
class LocalModel:
    """One anchor's fitted derivative record.

    Parameters
    ----------
    anchor_id : training-row id of the anchor
    gamma : estimated gradient, shape (d,)
    hess_diag : diagonal second-derivative estimates or None for first order
    sigma_min : smallest singular value of the fitted first-order design
    h_max : largest neighbor distance used in the fit
    residual_norm : L2 norm of the least-squares residual
    neighbor_ids : row ids that entered the fit (before degenerate drops)
    direction_l1_norms : L1 norms of the unit neighbor directions
    direction_sigma_min : smallest singular value of the unit-direction design
    dropped_neighbors : count of neighbors coincident with the anchor
    """

    anchor_id: int
    gamma: np.ndarray
    hess_diag: np.ndarray | None
    sigma_min: float
    h_max: float
    residual_norm: float
    neighbor_ids: np.ndarray
    direction_l1_norms: np.ndarray
    direction_sigma_min: float
    dropped_neighbors: int = 0


@dataclass(frozen=True)
class BatchLocalFits:
    """Vectorized fit results for a batch of anchors (arrays stacked on axis 0)."""

    anchor_ids: np.ndarray
    gamma: np.ndarray
    hess_diag: np.ndarray | None
    sigma_min: np.ndarray
    h_max: np.ndarray
    residual_norm: np.ndarray
    neighbor_ids: np.ndarray
    direction_l1_norms: np.ndarray
    direction_sigma_min: np.ndarray

    def model(self, i: int) -> LocalModel:
        """Materialize one anchor's LocalModel from the batch arrays."""
        return LocalModel(
            anchor_id=int(self.anchor_ids[i]),
            gamma=self.gamma[i],
            hess_diag=None if self.hess_diag is None else self.hess_diag[i],
            sigma_min=float(self.sigma_min[i]),
            h_max=float(self.h_max[i]),
            residual_norm=float(self.residual_norm[i]),
            neighbor_ids=self.neighbor_ids[i],
            direction_l1_norms=self.direction_l1_norms[i],
            direction_sigma_min=float(self.direction_sigma_min[i]),
        )


def _min_norm_solve(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-norm least-squares solution of stacked systems via SVD.

    Returns (coefficients, residual_norms) for a of shape (..., m, p) and
    b of shape (..., m). Singular values below the usual numerical cutoff
    are treated as zero, which handles rank-deficient neighbor geometry.
    """
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    cutoff = np.finfo(np.float64).eps * max(a.shape[-2], a.shape[-1]) * s[..., :1]
    safe = np.where(s > 0.0, s, 1.0)
    s_inv = np.where(s > cutoff, 1.0 / safe, 0.0)
    utb = np.einsum("...mr,...m->...r", u, b)
    coef = np.einsum("...rp,...r->...p", vt, s_inv * utb)
    resid = b - np.einsum("...mp,...p->...m", a, coef)
    return coef, np.linalg.norm(resid, axis=-1)


def fit_local_batch(features: np.ndarray, targets: np.ndarray,
                    anchor_ids: np.ndarray, neighbor_ids: np.ndarray,
                    order: int = 1, normalize_rows: bool = False) -> BatchLocalFits:
    """Fit local models for many anchors at once.

    Parameters
    ----------
    anchor_ids : (B,) training-row ids
    neighbor_ids : (B, k') neighbor row ids per anchor
    order : 1 for gradients only, 2 to add diagonal second derivatives

    Neighbors coinciding exactly with their anchor contribute zeroed rows,
    which leaves the solution and singular values unchanged relative to
    dropping them.
    """
    anchor_ids = np.asarray(anchor_ids, dtype=np.int64)
    neighbor_ids = np.asarray(neighbor_ids, dtype=np.int64)
    dx = features[neighbor_ids] - features[anchor_ids, None, :]
    dy = targets[neighbor_ids] - targets[anchor_ids, None]

    h = np.linalg.norm(dx, axis=-1)
    zero = h <= 0.0
    h_safe = np.where(zero, 1.0, h)
    nu = dx / h_safe[..., None]
    nu[zero] = 0.0
    dy = np.where(zero, 0.0, dy)
    dx = np.where(zero[..., None], 0.0, dx)
    h_max = h.max(axis=-1)
    nu_l1 = np.abs(nu).sum(axis=-1)

    direction_sv = np.linalg.svd(nu, compute_uv=False)
    direction_sigma_min = direction_sv[..., -1]

    if normalize_rows:
        a1 = nu
        b = dy / h_safe
        sigma_min = direction_sigma_min
    else:
        a1 = dx
        b = dy
        sigma_min = np.linalg.svd(dx, compute_uv=False)[..., -1]

    if order == 1:
        coef, resid = _min_norm_solve(a1, b)
        gamma, hess = coef, None
    elif order == 2:
        a = np.concatenate([a1, 0.5 * a1 * dx], axis=-1) if normalize_rows else \
            np.concatenate([dx, 0.5 * dx * dx], axis=-1)
        coef, resid = _min_norm_solve(a, b)
        d = features.shape[1]
        gamma, hess = coef[..., :d], coef[..., d:]
    else:
        raise ConfigError(f"order must be 1 or 2, got {order}")

    return BatchLocalFits(
        anchor_ids=anchor_ids,
        gamma=gamma,
        hess_diag=hess,
        sigma_min=sigma_min,
        h_max=h_max,
        residual_norm=resid,
        neighbor_ids=neighbor_ids,
        direction_l1_norms=nu_l1,
        direction_sigma_min=direction_sigma_min,
    )


def _validate_fit_inputs(features, targets, anchor_id, neighbor_ids, min_k):
    neighbor_ids = np.asarray(neighbor_ids, dtype=np.int64)
    if neighbor_ids.ndim != 1:
        raise ConfigError("neighbor_ids must be a flat id list")
    if anchor_id in neighbor_ids:
        raise ConfigError(f"anchor {anchor_id} appears among its own neighbors")
    if len(neighbor_ids) < min_k:
        raise ConfigError(
            f"need at least {min_k} neighbors for this fit, got {len(neighbor_ids)}"
        )
    rows = np.concatenate([neighbor_ids, [anchor_id]])
    if not np.all(np.isfinite(features[rows])) or not np.all(np.isfinite(targets[rows])):
        raise DataError("non-finite values in fit inputs")
    return neighbor_ids


def fit_local(features: np.ndarray, targets: np.ndarray, anchor_id: int,
              neighbor_ids, order: int = 1, *, normalize_rows: bool = False) -> LocalModel:
    """Fit the gradient (and optionally diagonal curvature) at one anchor.

    Requires k' >= d for order 1 and k' >= 2d for order 2. Neighbors whose
    coordinates equal the anchor's exactly are dropped and counted in
    ``dropped_neighbors``. Rank-deficient geometry falls back to the
    minimum-norm solution.
    """
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    d = features.shape[1]
    if order not in (1, 2):
        raise ConfigError(f"order must be 1 or 2, got {order}")
    neighbor_ids = _validate_fit_inputs(
        features, targets, anchor_id, neighbor_ids, d if order == 1 else 2 * d
    )

    dx = features[neighbor_ids] - features[anchor_id]
    keep = np.linalg.norm(dx, axis=1) > 0.0
    dropped = int((~keep).sum())
    if not keep.any():
        raise DataError(f"all neighbors of anchor {anchor_id} coincide with it")
    kept_ids = neighbor_ids[keep]

    fits = fit_local_batch(
        features, targets, np.array([anchor_id]), kept_ids[None, :],
        order=order, normalize_rows=normalize_rows,
    )
    model = fits.model(0)
    return LocalModel(
        anchor_id=model.anchor_id,
        gamma=model.gamma,
        hess_diag=model.hess_diag,
        sigma_min=model.sigma_min,
        h_max=model.h_max,
        residual_norm=model.residual_norm,
        neighbor_ids=neighbor_ids,
        direction_l1_norms=model.direction_l1_norms,
        direction_sigma_min=model.direction_sigma_min,
        dropped_neighbors=dropped,
    )


def lasso_cd_batch(a: np.ndarray, b: np.ndarray, lam: float) -> np.ndarray:
    """Cyclic coordinate descent for min ||a g - b||^2 + lam ||g||_1.

    Solves a stack of independent problems: a has shape (B, m, p) and b has
    shape (B, m). Iterates until the largest coefficient change across the
    whole batch drops below 1e-8 or 10,000 sweeps pass.
    """
    n_batch, _, p = a.shape
    col_sq = np.einsum("bmj,bmj->bj", a, a)
    col_safe = np.where(col_sq > 0.0, col_sq, 1.0)
    gamma = np.zeros((n_batch, p))
    resid = b.copy()
    half = lam / 2.0
    for _ in range(_LASSO_MAX_SWEEPS):
        max_change = 0.0
        for j in range(p):
            aj = a[:, :, j]
            rho = np.einsum("bm,bm->b", aj, resid) + col_sq[:, j] * gamma[:, j]
            new = np.sign(rho) * np.maximum(np.abs(rho) - half, 0.0) / col_safe[:, j]
            new = np.where(col_sq[:, j] > 0.0, new, gamma[:, j])
            delta = gamma[:, j] - new
            if np.any(delta != 0.0):
                resid += aj * delta[:, None]
                gamma[:, j] = new
                max_change = max(max_change, float(np.abs(delta).max()))
        if max_change <= _LASSO_TOL:
            break
    return gamma


def fit_local_lasso(features: np.ndarray, targets: np.ndarray, anchor_id: int,
                    neighbor_ids, lasso_lambda: float) -> LocalModel:
    """First-order local fit with an L1 penalty on the gradient.

    ``lasso_lambda=0`` recovers the plain least-squares gradient. Large
    penalties (>= 2 * ||dX^T dY||_inf) shrink the gradient to exactly zero.
    """
    if lasso_lambda < 0:
        raise ConfigError("lasso_lambda must be >= 0")
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    d = features.shape[1]
    neighbor_ids = _validate_fit_inputs(features, targets, anchor_id, neighbor_ids, d)

    dx = features[neighbor_ids] - features[anchor_id]
    dy = targets[neighbor_ids] - targets[anchor_id]
    h = np.linalg.norm(dx, axis=1)
    keep = h > 0.0
    dropped = int((~keep).sum())
    if not keep.any():
        raise DataError(f"all neighbors of anchor {anchor_id} coincide with it")
    dx, dy, h = dx[keep], dy[keep], h[keep]

    gamma = lasso_cd_batch(dx[None], dy[None], float(lasso_lambda))[0]
    nu = dx / h[:, None]
    sv = np.linalg.svd(dx, compute_uv=False)
    return LocalModel(
        anchor_id=int(anchor_id),
        gamma=gamma,
        hess_diag=None,
        sigma_min=float(sv[-1]),
        h_max=float(h.max()),
        residual_norm=float(np.linalg.norm(dx @ gamma - dy)),
        neighbor_ids=neighbor_ids,
        direction_l1_norms=np.abs(nu).sum(axis=1),
        direction_sigma_min=float(np.linalg.svd(nu, compute_uv=False)[-1]),
        dropped_neighbors=dropped,
    )


def taylor_predict(model: LocalModel, anchor_x: np.ndarray, anchor_y: float,
                   query_x: np.ndarray) -> float:
    """Evaluate the anchor's Taylor expansion at a query point.

    Returns y_m + gamma . (x - x_m), plus 0.5 * sum_j hess_j (x_j - x_mj)^2
    when the model carries second-order terms.
    """
    anchor_x = np.asarray(anchor_x, dtype=np.float64).reshape(-1)
    query_x = np.asarray(query_x, dtype=np.float64).reshape(-1)
    if anchor_x.shape != query_x.shape or anchor_x.shape[0] != model.gamma.shape[0]:
        raise ConfigError("anchor, query, and gradient dimensions disagree")
    delta = query_x - anchor_x
    value = float(anchor_y) + float(model.gamma @ delta)
    if model.hess_diag is not None:
        value += 0.5 * float(model.hess_diag @ (delta * delta))
    return value
