"""Exact nearest-neighbor retrieval under a diagonally weighted metric.

The metric is the squared weighted Euclidean form

    dist(a, b) = sum_j weights_j^2 * (a_j - b_j)^2

realized by multiplying coordinates with the weights and running a plain
squared-Euclidean search. Retrieval is exact: a kd-tree answers queries for
d <= 20 and a brute-force scan everything else. Ties at equal distance are
broken deterministically by lower row id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError

_TREE_MAX_DIM = 20


@dataclass(frozen=True)
class ScalingWeights:
    """Per-dimension non-negative multipliers defining the weighted metric."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ConfigError("weights must be a 1-d vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ConfigError("weights must be finite and >= 0")
        object.__setattr__(self, "weights", w)

    @classmethod
    def identity(cls, d: int) -> "ScalingWeights":
        return cls(np.ones(d))

    @property
    def d(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class NeighborSet:
    """k training-row ids with their metric values, sorted non-decreasing."""

    indices: np.ndarray
    distances: np.ndarray


class NeighborIndex:
    """Immutable search structure over weight-scaled feature rows.

    Changing the weights invalidates the index; build a new one. Queries are
    safe to run concurrently.
    """

    def __init__(self, features: np.ndarray, weights: ScalingWeights):
        features = np.ascontiguousarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise ConfigError("features must be a 2-d matrix")
        if weights.d != features.shape[1]:
            raise ConfigError(
                f"weights dimension {weights.d} does not match features d={features.shape[1]}"
            )
        self.features = features
        self.weights = weights
        self.scaled = features * weights.weights
        self.n, self.d = features.shape
        self._tree = cKDTree(self.scaled) if self.d <= _TREE_MAX_DIM else None


def build_index(features: np.ndarray, weights: ScalingWeights) -> NeighborIndex:
    """Build an exact index over rows under the weighted metric."""
    return NeighborIndex(features, weights)


def _brute_one(index: NeighborIndex, xw: np.ndarray, k: int, exclude) -> tuple[np.ndarray, np.ndarray]:
    diff = index.scaled - xw
    d2 = np.einsum("ij,ij->i", diff, diff)
    if exclude:
        d2 = d2.copy()
        d2[list(exclude)] = np.inf
    order = np.lexsort((np.arange(index.n), d2))[:k]
    return order, d2[order]

def query(index: NeighborIndex, x: np.ndarray, k: int,
          exclude: set[int] | None = None) -> NeighborSet:
    """Return the k nearest rows to x, excluding the given row ids.

    Results are ordered by (distance, row id); equal-distance ties always
    resolve to the lower id. Distances are the squared weighted metric.
    """
    exclude = exclude or set()
    n_usable = index.n - len(exclude)
    if not 1 <= k <= n_usable:
        raise ConfigError(f"k={k} out of range for {n_usable} usable rows")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != index.d:
        raise ConfigError(f"query dimension {x.shape[0]} does not match index d={index.d}")
    xw = x * index.weights.weights

    if index._tree is None:
        idx, d2 = _brute_one(index, xw, k, exclude)
        return NeighborSet(idx, d2)

    # Over-query so exclusions and a possible boundary tie can be resolved;
    # fall back to the exhaustive scan when the tree's cutoff is ambiguous.
    m = min(index.n, k + len(exclude) + 1)
    dist, idx = index._tree.query(xw, k=m)
    dist = np.atleast_1d(dist)
    idx = np.atleast_1d(idx)
    if exclude:
        keep = np.array([i not in exclude for i in idx], dtype=bool)
        dist, idx = dist[keep], idx[keep]
    if len(idx) < k or (len(idx) > k and dist[k - 1] == dist[k]):
        idx, d2 = _brute_one(index, xw, k, exclude)
        return NeighborSet(idx, d2)
    order = np.lexsort((idx[:k], dist[:k]))
    return NeighborSet(idx[:k][order], dist[:k][order] ** 2)


def query_many(index: NeighborIndex, queries: np.ndarray, k: int,
               exclude_self: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized k-nearest query for a batch of points.

    Parameters
    ----------
    queries : (B, d) points
    k : neighbors per query
    exclude_self : optional (B,) row ids excluded per query (leave-one-out)

    Returns
    -------
    (indices, distances) of shapes (B, k), ordered like :func:`query`.
    Distances are the squared weighted metric.
    """
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != index.d:
        raise ConfigError("queries must be (B, d)")
    b = queries.shape[0]
    n_usable = index.n - (1 if exclude_self is not None else 0)
    if not 1 <= k <= n_usable:
        raise ConfigError(f"k={k} out of range for {n_usable} usable rows")

    if index._tree is None:
        out_i = np.empty((b, k), dtype=np.int64)
        out_d = np.empty((b, k))
        for r in range(b):
            excl = {int(exclude_self[r])} if exclude_self is not None else set()
            out_i[r], out_d[r] = _brute_one(index, queries[r] * index.weights.weights, k, excl)
        return out_i, out_d

    extra = (1 if exclude_self is not None else 0) + 1
    m = min(index.n, k + extra)
    dist, idx = index._tree.query(queries * index.weights.weights, k=m)
    dist = dist.reshape(b, m)
    idx = idx.reshape(b, m)

    out_i = np.empty((b, k), dtype=np.int64)
    out_d = np.empty((b, k))
    for r in range(b):
        dr, ir = dist[r], idx[r]
        if exclude_self is not None:
            keep = ir != exclude_self[r]
            dr, ir = dr[keep], ir[keep]
        if len(ir) < k or (len(ir) > k and dr[k - 1] == dr[k]):
            excl = {int(exclude_self[r])} if exclude_self is not None else set()
            out_i[r], out_d[r] = _brute_one(index, queries[r] * index.weights.weights, k, excl)
            continue
        order = np.lexsort((ir[:k], dr[:k]))
        out_i[r] = ir[:k][order]
        out_d[r] = dr[:k][order] ** 2
    return out_i, out_d
