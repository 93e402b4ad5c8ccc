"""Failure analysis and feature-importance tooling.

Aggregates the per-anchor relevance vectors |(x - x_m) * gamma_m| into
per-dimension distributions, ranks dimensions by them, projects datasets
onto the highest-ranked dimensions, and exports prediction traces as JSON
for external 2-d plotting.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DataError
from .nnindex import query_many
from .predictor import DnnrModel, PredictionTrace, predict_dnnr_traced


@dataclass(frozen=True)
class RelevanceSummary:
    """Pooled relevance values per dimension plus a ranking.

    ``per_dimension[j]`` holds one value per (query, anchor) pair;
    ``dimension_ranks`` lists dimensions from most to least relevant by
    median, ties resolving to the lower dimension index.
    """

    per_dimension: list[np.ndarray]
    dimension_ranks: np.ndarray

    @property
    def d(self) -> int:
        return len(self.per_dimension)

    def medians(self) -> np.ndarray:
        return np.array([float(np.median(v)) for v in self.per_dimension])


def collect_relevance(model: DnnrModel, queries: np.ndarray) -> RelevanceSummary:
    """Pool per-anchor relevance vectors over a batch of queries.

    Each query contributes one |(x - x_m) * gamma_m| vector per anchor m in
    its neighbor set, so every dimension collects len(queries) * k values.

    Parameters
    ----------
    model : fitted DNNR model.
    queries : (m, d) points, typically validation or test inputs.
    """
    pts = np.asarray(queries, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise DataError("queries must be a non-empty (m, d) array")
    if pts.shape[1] != model.data.d:
        raise DataError(f"queries have {pts.shape[1]} columns, model expects {model.data.d}")
    if not np.all(np.isfinite(pts)):
        raise DataError("queries contain non-finite values")

    anchor_ids, _ = query_many(model.index, pts, model.config.k)
    model.ensure_local_fits(anchor_ids.ravel())
    delta = pts[:, None, :] - model.data.features[anchor_ids]
    values = np.abs(delta * model._gamma[anchor_ids]).reshape(-1, model.data.d)

    medians = np.median(values, axis=0)
    ranks = np.lexsort((np.arange(model.data.d), -medians))
    return RelevanceSummary(
        per_dimension=[values[:, j].copy() for j in range(model.data.d)],
        dimension_ranks=ranks,
    )


def select_variables(data: Dataset, summary: RelevanceSummary, keep: int) -> Dataset:
    """Project a dataset onto its ``keep`` most relevant dimensions.

    Selected columns stay in their original order, so ``keep = d`` returns
    an identical dataset. Column names and target metadata carry over.
    """
    if not 1 <= keep <= summary.d:
        raise ConfigError(f"keep={keep} out of range [1, {summary.d}]")
    if data.d != summary.d:
        raise DataError(f"dataset has {data.d} columns, summary covers {summary.d}")
    cols = np.sort(summary.dimension_ranks[:keep])
    return data.select_columns(cols)


def drop_variables(data: Dataset, summary: RelevanceSummary, drop: int) -> Dataset:
    """Remove the ``drop`` most relevant dimensions, keeping the rest."""
    if not 1 <= drop < summary.d:
        raise ConfigError(f"drop={drop} out of range [1, {summary.d - 1}]")
    if data.d != summary.d:
        raise DataError(f"dataset has {data.d} columns, summary covers {summary.d}")
    cols = np.sort(summary.dimension_ranks[drop:])
    return data.select_columns(cols)


def write_relevance_csv(summary: RelevanceSummary, path: str) -> None:
    """Write per-dimension relevance statistics as CSV.

    Columns: dimension, count, median, p25, p75.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dimension", "count", "median", "p25", "p75"])
        for j, values in enumerate(summary.per_dimension):
            writer.writerow([
                j,
                len(values),
                repr(float(np.median(values))),
                repr(float(np.percentile(values, 25))),
                repr(float(np.percentile(values, 75))),
            ])


def _project(points: np.ndarray, dims: tuple[int, int]) -> list[list[float]]:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    return [[float(p[dims[0]]), float(p[dims[1]])] for p in pts]


def export_traces(traces: list[PredictionTrace], dims: tuple[int, int],
                  path: str | None = None,
                  true_targets: np.ndarray | None = None) -> list[dict]:
    """Serialize prediction traces for external 2-d neighborhood plots.

    Every coordinate is projected onto the two requested dimensions; the
    per-anchor estimates, the raw mean, and the final prediction are kept in
    full so plots can be annotated with errors. Floats serialize via repr,
    which round-trips bit-exactly through JSON.

    Parameters
    ----------
    traces : traces from ``predict_dnnr_traced``.
    dims : pair of dimension indices to project onto.
    path : optional output file; when given, the JSON array is written there.
    true_targets : optional true target per trace; adds an ``error`` field
        (prediction minus truth).

    Returns
    -------
    The list of JSON-ready dicts (one per trace).
    """
    if len(dims) != 2:
        raise ConfigError("dims must be a pair of dimension indices")
    if traces:
        d = traces[0].query.shape[0]
        if not (0 <= dims[0] < d and 0 <= dims[1] < d):
            raise ConfigError(f"dims {dims} out of range for {d} dimensions")
    if true_targets is not None and len(true_targets) != len(traces):
        raise DataError("true_targets length must match traces")

    records = []
    for t, trace in enumerate(traces):
        anchors = []
        for a in range(len(trace.neighbor_ids)):
            anchors.append({
                "anchor_id": int(trace.neighbor_ids[a]),
                "coords": _project(trace.anchor_points[a], dims)[0],
                "estimate": float(trace.per_neighbor_estimates[a]),
                "relevance": [float(v) for v in trace.per_neighbor_relevance[a]],
                "fit_neighbors": _project(trace.fit_neighbor_points[a], dims)
                if trace.fit_neighbor_points else [],
            })
        record = {
            "dims": [int(dims[0]), int(dims[1])],
            "query": _project(trace.query, dims)[0],
            "anchors": anchors,
            "raw_mean": float(trace.raw_mean),
            "prediction": float(trace.clipped),
            "was_clipped": bool(trace.was_clipped),
            "error": None if true_targets is None
            else float(trace.clipped - true_targets[t]),
        }
        records.append(record)

    if path is not None:
        with open(path, "w") as fh:
            json.dump(records, fh, indent=1)
    return records


def trace_queries(model: DnnrModel, queries: np.ndarray) -> list[PredictionTrace]:
    """Run traced predictions for a batch of queries."""
    pts = np.asarray(queries, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    return [predict_dnnr_traced(model, x) for x in pts]
