"""Error-bound diagnostics for gradient-corrected nearest neighbor regression.

Turns the method's pointwise guarantee into runtime-checkable quantities: a
bound on the gradient-estimation error of a local least-squares fit, the
sample-size and neighbor-count requirements implied by a target tolerance,
and per-query error tolerances that can be compared against observed errors.

The quantities follow a fixed set of symbols:

- ``lipschitz`` (the Lipschitz bound on the relevant derivatives of the
  target function, written theta below),
- ``mu`` (order of the Taylor expansion the regressor uses),
- ``sigma_min`` (smallest singular value of a local gradient-fit design),
- ``tau`` (expected value of sqrt(sum_i ||nu_i||_1^(2 mu)) / sigma_min over
  neighborhoods, where nu_i are the unit directions from an anchor to its
  fit neighbors) and
- ``ball_mass`` (probability mass the data distribution places on a radius-h
  ball around a query).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .nnindex import query_many
from .predictor import DnnrModel


@dataclass(frozen=True)
class BoundInputs:
    """Inputs to the pointwise-guarantee calculator.

    Parameters
    ----------
    lipschitz : Lipschitz bound theta on the target function's derivatives.
    mu : Taylor order of the regressor (1 for gradient-only).
    delta : probability tolerance in (0, 1).
    epsilon : target error tolerance.
    y_range : (y_min, y_max) range of the target values.
    ball_mass : mass of the radius-h ball around the query, in (0, 1].
    tau : gradient-estimation difficulty term; supply directly or via
        :func:`estimate_tau`.
    sigma_min : diagnostic passthrough, the typical smallest singular value
        backing the tau estimate (not used by any formula here).
    n_train : available training-set size; when omitted, the neighbor-count
        ceiling is evaluated at the required sample size instead.
    """

    lipschitz: float
    mu: int = 1
    delta: float = 0.05
    epsilon: float = 0.1
    y_range: tuple[float, float] = (0.0, 1.0)
    ball_mass: float = 1.0
    tau: float = 1.0
    sigma_min: float = 1.0
    n_train: int | None = None

    def validate(self) -> None:
        if not (math.isfinite(self.lipschitz) and self.lipschitz > 0):
            raise ConfigError("lipschitz must be a positive finite number")
        if self.mu < 1:
            raise ConfigError("mu must be a positive integer")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError("delta must lie in (0, 1)")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigError("epsilon must be a positive finite number")
        lo, hi = self.y_range
        if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
            raise ConfigError("y_range must be a finite (min, max) with max > min")
        if not 0.0 < self.ball_mass <= 1.0:
            raise ConfigError("ball_mass must lie in (0, 1]")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ConfigError("tau must be a positive finite number")
        if not (math.isfinite(self.sigma_min) and self.sigma_min > 0):
            raise ConfigError("sigma_min must be a positive finite number")
        if self.n_train is not None and self.n_train < 1:
            raise ConfigError("n_train must be at least 1 when given")


@dataclass(frozen=True)
class BoundReport:
    """Requirements and tolerances implied by a :class:`BoundInputs`.

    ``eps_dnnr`` and ``eps_knn`` are both evaluated at ``h_star_dnnr`` so
    they are directly comparable; ``eps_dnnr`` then reproduces ``epsilon``
    up to round-off.  ``n_required`` is exact below the float range and is
    reconstructed from ``log10_n_required`` above it.  ``feasible`` is set
    when ``k_min <= k_max``; infeasible combinations are reported, never
    raised.
    """

    h_star_dnnr: float
    h_star_knn: float
    n_required: int
    log10_n_required: float
    k_min: int
    k_max: int
    eps_dnnr: float
    eps_knn: float
    tau: float
    sigma_min: float
    feasible: bool


def gradient_error_bound(sigma_min: float, h_max: float, mu: int,
                         lipschitz: float, nu_l1_norms: Sequence[float]) -> float:
    """Bound the L2 error of a local least-squares gradient estimate.

    Parameters
    ----------
    sigma_min : smallest singular value of the fit's design matrix.
    h_max : largest anchor-to-neighbor distance in the fit.
    mu : Taylor order of the local model.
    lipschitz : bound theta on the target's order-(mu+1) derivatives over
        the neighborhood.
    nu_l1_norms : l1 norms of the unit directions from the anchor to each
        fit neighbor; unit l2 directions in d dimensions have l1 norms in
        [1, sqrt(d)].

    Returns
    -------
    theta * h_max**mu / (sigma_min * (mu+1)!) * sqrt(sum ||nu_i||_1^(2 mu)).
    Returns ``inf`` when sigma_min <= 0 (rank-deficient design, bound
    undefined).
    """
    if not (math.isfinite(h_max) and h_max > 0):
        raise ConfigError("h_max must be a positive finite number")
    if not (math.isfinite(lipschitz) and lipschitz > 0):
        raise ConfigError("lipschitz must be a positive finite number")
    if mu < 1:
        raise ConfigError("mu must be a positive integer")
    norms = np.asarray(nu_l1_norms, dtype=np.float64)
    if norms.ndim != 1 or norms.size == 0:
        raise ConfigError("nu_l1_norms must be a non-empty 1-d sequence")
    if np.any(norms < 1.0 - 1e-9):
        raise ConfigError("unit directions have l1 norm >= 1")
    if not (math.isfinite(sigma_min) and sigma_min > 0):
        return math.inf
    scale = lipschitz * h_max**mu / (sigma_min * math.factorial(mu + 1))
    return float(scale * math.sqrt(float(np.sum(norms ** (2 * mu)))))


def _ceil_large(value_log10: float) -> int:
    # Reconstruct an integer from its base-10 log once the float range is
    # exhausted; leading digits are accurate, which is all the astronomical
    # regime can claim anyway.
    ipart = int(math.floor(value_log10))
    frac = 10.0 ** (value_log10 - ipart)
    return math.ceil(frac * 10**15) * 10 ** (ipart - 15)


def guarantee_conditions(inputs: BoundInputs) -> BoundReport:
    """Evaluate the sample-size, neighbor-count, and radius requirements.

    Returns a :class:`BoundReport` with

    - ``n_required = ceil(8 / ball_mass * ln(2 / delta))``,
    - ``k_min = ceil(2 (y_max - y_min)^2 / epsilon^2 * ln(4 / delta))``,
    - ``k_max = floor(n * ball_mass / 2)`` at ``n_train`` (or at
      ``n_required`` when no training size is given),
    - ``h_star_dnnr = sqrt(epsilon / (lipschitz * (1 + tau)))`` and
      ``h_star_knn = epsilon / (2 * lipschitz)``, the largest neighbor radii
      that keep each method within ``epsilon``.
    """
    inputs.validate()
    theta = inputs.lipschitz
    ln_n = math.log(2.0 / inputs.delta)
    log10_n = math.log10(8.0) - math.log10(inputs.ball_mass) + math.log10(ln_n)
    raw_n = 8.0 / inputs.ball_mass * ln_n
    if math.isfinite(raw_n) and raw_n < 2.0**63:
        n_required = math.ceil(raw_n)
    else:
        n_required = _ceil_large(log10_n)

    y_span = inputs.y_range[1] - inputs.y_range[0]
    k_min = math.ceil(2.0 * y_span**2 / inputs.epsilon**2 * math.log(4.0 / inputs.delta))

    n_for_k = inputs.n_train if inputs.n_train is not None else n_required
    if n_for_k < 2.0**63:
        k_max = math.floor(0.5 * n_for_k * inputs.ball_mass)
    else:
        k_max = math.floor(0.5 * 10.0 ** (log10_n + math.log10(inputs.ball_mass)))

    h_star_dnnr = math.sqrt(inputs.epsilon / (theta * (1.0 + inputs.tau)))
    h_star_knn = inputs.epsilon / (2.0 * theta)
    eps_dnnr = h_star_dnnr**2 * theta * (1.0 + inputs.tau)
    eps_knn = 2.0 * theta * h_star_dnnr

    return BoundReport(
        h_star_dnnr=h_star_dnnr,
        h_star_knn=h_star_knn,
        n_required=n_required,
        log10_n_required=log10_n,
        k_min=k_min,
        k_max=k_max,
        eps_dnnr=eps_dnnr,
        eps_knn=eps_knn,
        tau=inputs.tau,
        sigma_min=inputs.sigma_min,
        feasible=k_min <= k_max,
    )


@dataclass(frozen=True)
class TauEstimate:
    """Empirical tau with bookkeeping for excluded (degenerate) points."""

    value: float
    n_used: int
    n_excluded: int
    mean_sigma_min: float


def _anchor_contributions(model: DnnrModel, anchor_ids: np.ndarray,
                          mu: int) -> np.ndarray:
    """sqrt(sum_i ||nu_i||_1^(2 mu)) / sigma_min per anchor; nan if degenerate."""
    model.ensure_local_fits(anchor_ids.ravel())
    flat = np.unique(anchor_ids)
    sigma = model._sigma_min[flat]
    numer = np.sqrt((model._nu_l1[flat] ** (2 * mu)).sum(axis=1))
    contrib = np.full(model.data.n, np.nan)
    ok = np.isfinite(sigma) & (sigma > 0.0)
    contrib[flat[ok]] = numer[ok] / sigma[ok]
    return contrib[anchor_ids]


def estimate_tau(model: DnnrModel, sample_points: np.ndarray,
                 mu: int = 1) -> TauEstimate:
    """Estimate tau empirically from local gradient fits.

    For each sample point, the nearest training anchor's fitted design
    supplies the unit directions nu_i (anchor to fit neighbor, normalized)
    and the smallest singular value sigma_min; the point contributes
    sqrt(sum_i ||nu_i||_1^(2 mu)) / sigma_min. Points whose design is
    rank-deficient (sigma_min = 0) are excluded and counted.

    Parameters
    ----------
    model : fitted DNNR model.
    sample_points : (m, d) points at which to sample the neighborhoods.
    mu : Taylor order, matching the local models.

    Returns
    -------
    TauEstimate with the mean contribution, usage counts, and the mean
    sigma_min of the designs that entered the estimate.
    """
    if mu < 1:
        raise ConfigError("mu must be a positive integer")
    pts = np.asarray(sample_points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] != model.data.d:
        raise DataError("sample_points must be (m, d) with the model's d")
    if not np.all(np.isfinite(pts)):
        raise DataError("sample_points contain non-finite values")

    anchor_ids, _ = query_many(model.index, pts, 1)
    anchor_ids = anchor_ids[:, 0]
    contrib = _anchor_contributions(model, anchor_ids, mu)
    ok = np.isfinite(contrib)
    n_excluded = int(np.sum(~ok))
    if not np.any(ok):
        raise DataError("every sampled neighborhood was rank-deficient")
    return TauEstimate(
        value=float(contrib[ok].mean()),
        n_used=int(ok.sum()),
        n_excluded=n_excluded,
        mean_sigma_min=float(model._sigma_min[anchor_ids[ok]].mean()),
    )


@dataclass(frozen=True)
class PointwiseTolerances:
    """Per-query error tolerances in the model's (weighted) metric.

    ``h`` is each query's distance to its k-th anchor, ``tau_local`` the
    mean tau contribution over that query's anchors. Tolerances follow
    ``eps_dnnr = h^2 * theta * (1 + tau_local)`` and ``eps_knn = 2 theta h``.
    """

    h: np.ndarray
    tau_local: np.ndarray
    eps_dnnr: np.ndarray
    eps_knn: np.ndarray
    n_excluded_anchors: int


def pointwise_tolerances(model: DnnrModel, test_points: np.ndarray,
                         lipschitz: float, mu: int = 1) -> PointwiseTolerances:
    """Compute per-point error tolerances for DNNR and KNN.

    Parameters
    ----------
    model : fitted DNNR model; its k determines the neighbor radius h.
    test_points : (m, d) query points.
    lipschitz : Lipschitz bound theta for the target's derivatives.
    mu : Taylor order used in the tau contributions.

    Rank-deficient anchors are dropped from each query's tau_local mean
    (and counted); a query whose anchors are all degenerate raises.
    """
    if not (math.isfinite(lipschitz) and lipschitz > 0):
        raise ConfigError("lipschitz must be a positive finite number")
    pts = np.asarray(test_points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] != model.data.d:
        raise DataError("test_points must be (m, d) with the model's d")
    if not np.all(np.isfinite(pts)):
        raise DataError("test_points contain non-finite values")

    anchor_ids, d2 = query_many(model.index, pts, model.config.k)
    h = np.sqrt(d2[:, -1])
    contrib = _anchor_contributions(model, anchor_ids, mu)
    ok = np.isfinite(contrib)
    if not np.all(ok.any(axis=1)):
        bad = int(np.flatnonzero(~ok.any(axis=1))[0])
        raise DataError(f"all anchors of test point {bad} are rank-deficient")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        tau_local = np.nanmean(contrib, axis=1)
    eps_dnnr = h**2 * lipschitz * (1.0 + tau_local)
    eps_knn = 2.0 * lipschitz * h
    return PointwiseTolerances(
        h=h,
        tau_local=tau_local,
        eps_dnnr=eps_dnnr,
        eps_knn=eps_knn,
        n_excluded_anchors=int(np.sum(~ok)),
    )


@dataclass(frozen=True)
class BallMassEstimate:
    """Monte-Carlo ball-mass estimate with its binomial standard error."""

    mass: float
    standard_error: float
    n_hits: int
    n_mc: int


def ball_mass_estimate(sampler: Callable[[int], np.ndarray], center: np.ndarray,
                       radius: float, n_mc: int,
                       metric: str = "euclidean") -> BallMassEstimate:
    """Estimate the mass a distribution places on a ball by Monte Carlo.

    Parameters
    ----------
    sampler : callable drawing ``sampler(n) -> (n, d)`` points from the
        data distribution (the caller controls seeding).
    center, radius : ball location and size; radius > 0.
    n_mc : number of Monte-Carlo draws, at least 1000.
    metric : "euclidean" or "linf".

    Returns
    -------
    BallMassEstimate with hit fraction and sqrt(p (1-p) / n) standard
    error. Zero hits return mass 0 with a warning, since downstream
    sample-size formulas become infeasible there.
    """
    if n_mc < 1000:
        raise ConfigError("n_mc must be at least 1000")
    if not (math.isfinite(radius) and radius > 0):
        raise ConfigError("radius must be a positive finite number")
    if metric not in ("euclidean", "linf"):
        raise ConfigError(f"unknown metric {metric!r}")
    c = np.asarray(center, dtype=np.float64).reshape(-1)
    draws = np.asarray(sampler(n_mc), dtype=np.float64)
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.shape != (n_mc, c.shape[0]):
        raise DataError(
            f"sampler returned shape {draws.shape}, expected ({n_mc}, {c.shape[0]})")
    diff = np.abs(draws - c)
    if metric == "euclidean":
        inside = np.einsum("ij,ij->i", diff, diff) <= radius**2
    else:
        inside = diff.max(axis=1) <= radius
    hits = int(inside.sum())
    mass = hits / n_mc
    if hits == 0:
        warnings.warn("no Monte-Carlo draws landed in the ball; mass estimate is 0",
                      stacklevel=2)
    se = math.sqrt(mass * (1.0 - mass) / n_mc)
    return BallMassEstimate(mass=mass, standard_error=se, n_hits=hits, n_mc=n_mc)


def uniform_cube_ball_mass(radius: float, d: int) -> float:
    """Average max-norm ball mass for the uniform distribution on [0,1]^d.

    Averaged over a uniformly drawn center c, each coordinate of a uniform
    draw lands within ``radius`` of c with probability 2h - h^2 (clipped at
    the cube boundary), so the average ball mass is (2h - h^2)^d. This is
    the computable stand-in for ball_mass when the query location is not
    fixed in advance.
    """
    if not (math.isfinite(radius) and radius > 0):
        raise ConfigError("radius must be a positive finite number")
    if d < 1:
        raise ConfigError("d must be at least 1")
    per_dim = 1.0 if radius >= 1.0 else 2.0 * radius - radius**2
    return per_dim**d
