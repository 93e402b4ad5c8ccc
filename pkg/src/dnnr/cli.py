"""Command-line harness.

Every verb is a thin client over the HTTP service: datasets are read
locally from CSV, sent inline, and results come back as JSON. Without
``--server`` the service runs in-process, so no deployment is needed;
with it, the same commands drive a remote instance.

Exit codes: 0 success, 1 configuration error (bad flags, bad method,
infeasible hyperparameters), 2 data error (unreadable CSV, non-numeric or
non-finite values, shape mismatches).
"""

from __future__ import annotations

import csv
import json
import sys

import click
import numpy as np

from .client import ServiceClient
from .dataset import Dataset, load_csv, write_csv
from .errors import ConfigError, DataError

_FORMATS = ("json", "table", "csv")


def _echo_table(headers: list[str], rows: list[list]) -> None:
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    for r, row in enumerate(cells):
        click.echo("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if r == 0:
            click.echo("  ".join("-" * w for w in widths))


def _write_or_echo(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


def _read_grid(path: str | None) -> dict | None:
    if path is None:
        return None
    try:
        with open(path) as fh:
            grid = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read grid file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"grid file is not valid JSON: {exc}") from exc
    if not isinstance(grid, dict):
        raise ConfigError("grid file must hold a JSON object of name -> values")
    return {k: (v if isinstance(v, list) else [v]) for k, v in grid.items()}


def _grid_to_single(grid: dict | None) -> dict:
    """Collapse a grid of singleton lists into one hyperparameter map."""
    if grid is None:
        return {}
    single = {}
    for key, values in grid.items():
        if len(values) != 1:
            raise ConfigError(
                f"fit takes one value per hyperparameter; {key!r} has"
                f" {len(values)} (use `evaluate` to search a grid)")
        single[key] = values[0]
    return single


def _load_dataset(path: str, target_col: str | None) -> Dataset:
    return load_csv(path, target_col if target_col is not None else -1)


def _load_queries(path: str, target_col: str | None):
    """Read a query CSV; split off the target column when present.

    Returns (features, targets-or-None, column_names). Unlike training
    data, query files may omit the target.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path} is empty")

    def _numeric(cell: str) -> bool:
        try:
            float(cell)
            return True
        except ValueError:
            return False

    header = None
    if not all(_numeric(c) for c in rows[0]):
        header, rows = rows[0], rows[1:]
        if not rows:
            raise DataError(f"{path} holds a header but no data rows")

    width = len(rows[0])
    matrix = []
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path} row {i + 1}: expected {width} cells, got {len(row)}")
        try:
            matrix.append([float(c) for c in row])
        except ValueError as exc:
            raise DataError(f"{path} row {i + 1}: {exc}") from exc

    target_idx = None
    if target_col is not None:
        if header is not None and target_col in header:
            target_idx = header.index(target_col)
        else:
            try:
                idx = int(target_col)
            except ValueError:
                idx = None
            if idx is not None and -width <= idx < width:
                target_idx = idx % width
    if target_idx is None:
        return matrix, None, header
    features = [r[:target_idx] + r[target_idx + 1:] for r in matrix]
    targets = [r[target_idx] for r in matrix]
    names = None
    if header is not None:
        names = header[:target_idx] + header[target_idx + 1:]
    return features, targets, names


def _read_bundle(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read model file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc}") from exc


def _report_rows(report: dict) -> list[list]:
    return [
        ["mean_mse", repr(report["mean_mse"])],
        ["std_mse", repr(report["std_mse"])],
        ["r2", repr(report["r2"])],
        ["per_fold_mse", ", ".join(f"{m:.6g}" for m in report["per_fold_mse"])],
        ["best_hyperparameters", json.dumps(report["best_hyperparameters"])],
        ["folds", report["folds"]],
        ["seed", report["seed"]],
    ]


@click.group()
def cli() -> None:
    """Differential nearest neighbor regression toolkit."""


_server_option = click.option("--server", default=None, metavar="URL",
                              help="Address of a running service; default runs in-process.")
_seed_option = click.option("--seed", default=0, show_default=True, type=int)
_format_option = click.option("--format", "fmt", default="table", show_default=True,
                              type=click.Choice(_FORMATS))


@cli.command()
@click.option("--dataset", required=True, metavar="CSV", help="Training data.")
@click.option("--target-col", default=None, metavar="NAME|INDEX",
              help="Target column; default: last column.")
@click.option("--method", default="dnnr", show_default=True)
@click.option("--grid", "grid_path", default=None, metavar="JSON",
              help="Hyperparameters as JSON (single value per name).")
@click.option("--scale-features/--no-scale-features", "scale_features",
              default=None, help="Override the method's metric-weight default.")
@click.option("--out", default="model.json", show_default=True, metavar="PATH",
              help="Where to store the fitted model bundle.")
@_seed_option
@_format_option
@_server_option
def fit(dataset, target_col, method, grid_path, scale_features, out, seed, fmt, server):
    """Fit one method on a CSV dataset and save a model bundle."""
    data = _load_dataset(dataset, target_col)
    hp = _grid_to_single(_read_grid(grid_path))
    with ServiceClient(server) as client:
        info = client.fit(
            method,
            features=data.features.tolist(),
            targets=data.targets.tolist(),
            column_names=list(data.column_names) if data.column_names else None,
            target_name=data.target_name,
            hyperparameters=hp,
            scale_features=scale_features,
            seed=seed,
        )
        bundle = client.export_model(info["model_id"])
    with open(out, "w") as fh:
        json.dump(bundle, fh)
    if fmt == "json":
        click.echo(json.dumps({k: info[k] for k in
                               ("method", "n", "d", "hyperparameters", "weights")}))
    else:
        rows = [["method", info["method"]], ["rows", info["n"]],
                ["features", info["d"]],
                ["hyperparameters", json.dumps(info["hyperparameters"])]]
        if info.get("weights"):
            rows.append(["weights", ", ".join(f"{w:.4g}" for w in info["weights"])])
        _echo_table(["field", "value"], rows)
    click.echo(f"saved model bundle to {out}")


@cli.command()
@click.option("--model", "model_path", required=True, metavar="JSON",
              help="Model bundle produced by `fit`.")
@click.option("--dataset", required=True, metavar="CSV",
              help="Query rows; the target column is optional.")
@click.option("--target-col", default=None, metavar="NAME|INDEX",
              help="Target column for error reporting, if present.")
@click.option("--out", default=None, metavar="PATH")
@_format_option
@_server_option
def predict(model_path, dataset, target_col, out, fmt, server):
    """Predict a saved model on query rows from a CSV file."""
    bundle = _read_bundle(model_path)
    features, targets, _ = _load_queries(dataset, target_col)
    if features and bundle.get("features") and \
            len(features[0]) == len(bundle["features"][0]) + 1 and targets is None:
        raise ConfigError(
            "query rows have one more column than the model expects;"
            " pass --target-col to split off the target")
    with ServiceClient(server) as client:
        model_id = client.import_model(bundle)["model_id"]
        preds = client.predict(model_id, features)
    mse = None
    if targets is not None:
        mse = sum((p - t) ** 2 for p, t in zip(preds, targets)) / len(preds)
    if fmt == "json":
        _write_or_echo(json.dumps({"predictions": preds, "mse": mse}), out)
    elif fmt == "csv":
        lines = ["prediction" + (",target" if targets is not None else "")]
        for i, p in enumerate(preds):
            lines.append(repr(p) + ("," + repr(targets[i]) if targets is not None else ""))
        _write_or_echo("\n".join(lines), out)
    else:
        headers = ["row", "prediction"] + (["target"] if targets is not None else [])
        rows = [[i, f"{p:.6g}"] + ([f"{targets[i]:.6g}"] if targets is not None else [])
                for i, p in enumerate(preds)]
        _echo_table(headers, rows)
        if out:
            with open(out, "w") as fh:
                json.dump({"predictions": preds, "mse": mse}, fh)
            click.echo(f"wrote {out}")
    if mse is not None and fmt != "json":
        click.echo(f"mse: {mse:.6g}")


@cli.command()
@click.option("--dataset", required=True, metavar="CSV")
@click.option("--target-col", default=None, metavar="NAME|INDEX")
@click.option("--method", default="dnnr", show_default=True)
@click.option("--folds", default=10, show_default=True, type=int)
@click.option("--grid", "grid_path", default=None, metavar="JSON",
              help="Hyperparameter grid; default: built-in per dataset size.")
@click.option("--scale-features/--no-scale-features", "scale_features", default=None)
@click.option("--out", default=None, metavar="PATH")
@_seed_option
@_format_option
@_server_option
def evaluate(dataset, target_col, method, folds, grid_path, scale_features,
             out, seed, fmt, server):
    """Grid-searched k-fold evaluation of one method on a CSV dataset."""
    data = _load_dataset(dataset, target_col)
    grid = _read_grid(grid_path)
    with ServiceClient(server) as client:
        report = client.evaluate(
            method,
            features=data.features.tolist(),
            targets=data.targets.tolist(),
            folds=folds,
            seed=seed,
            grid=grid,
            scale_features=scale_features,
        )
    if fmt == "json":
        _write_or_echo(json.dumps(report, sort_keys=True), out)
    elif fmt == "csv":
        lines = ["fold,mse,r2"]
        for i, (m, r) in enumerate(zip(report["per_fold_mse"], report["per_fold_r2"])):
            lines.append(f"{i},{repr(m)},{repr(r)}")
        _write_or_echo("\n".join(lines), out)
    else:
        click.echo(f"method: {report['method']}")
        _echo_table(["field", "value"], _report_rows(report))
        if out:
            with open(out, "w") as fh:
                json.dump(report, fh, sort_keys=True)
            click.echo(f"wrote {out}")


@cli.command()
@click.option("--axis", required=True,
              type=click.Choice(["n_samples", "noise", "n_features"]))
@click.option("--values", required=True, metavar="V1,V2,...",
              help="Comma-separated axis values.")
@click.option("--methods", default="dnnr,knn", show_default=True,
              metavar="M1,M2,...")
@click.option("--folds", default=5, show_default=True, type=int)
@click.option("--n-samples", default=5000, show_default=True, type=int)
@click.option("--n-features", default=10, show_default=True, type=int)
@click.option("--noise", default=0.0, show_default=True, type=float)
@click.option("--grid", "grid_path", default=None, metavar="JSON")
@click.option("--out", default=None, metavar="PATH")
@_seed_option
@_format_option
@_server_option
def sweep(axis, values, methods, folds, n_samples, n_features, noise,
          grid_path, out, seed, fmt, server):
    """Sweep one Friedman-1 generator axis across methods."""
    try:
        axis_values = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--values must be comma-separated numbers: {exc}") from exc
    if not axis_values:
        raise ConfigError("--values is empty")
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    grid = _read_grid(grid_path)
    with ServiceClient(server) as client:
        result = client.sweep(axis, axis_values, method_list, seed=seed,
                              folds=folds, n_samples=n_samples,
                              n_features=n_features, noise=noise, grid=grid)
    rows = result["rows"]
    if fmt == "json":
        _write_or_echo(json.dumps(result, sort_keys=True), out)
    elif fmt == "csv":
        lines = ["axis,value,method,mean_mse,std_mse,r2"]
        for r in rows:
            lines.append(",".join([r["axis"], repr(r["value"]), r["method"],
                                   repr(r["mean_mse"]), repr(r["std_mse"]),
                                   repr(r["r2"])]))
        _write_or_echo("\n".join(lines), out)
    else:
        _echo_table(
            ["value", "method", "mean_mse", "std_mse", "r2", "hyperparameters"],
            [[f"{r['value']:g}", r["method"], f"{r['mean_mse']:.4g}",
              f"{r['std_mse']:.4g}", f"{r['r2']:.4f}",
              json.dumps(r["best_hyperparameters"])] for r in rows])
        if out:
            with open(out, "w") as fh:
                json.dump(result, fh, sort_keys=True)
            click.echo(f"wrote {out}")


@cli.command()
@click.option("--n-train", default=10000, show_default=True, type=int)
@click.option("--n-test", default=2000, show_default=True, type=int)
@click.option("--k", default=7, show_default=True, type=int)
@click.option("--k-prime", default=32, show_default=True, type=int)
@click.option("--lipschitz", default=40.0, show_default=True, type=float)
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--out", default=None, metavar="CSV",
              help="Write the per-point tolerance table.")
@_format_option
@_server_option
def bounds(n_train, n_test, k, k_prime, lipschitz, seed, out, fmt, server):
    """Compare per-point error tolerances against realized errors."""
    with ServiceClient(server) as client:
        result = client.bounds(n_train=n_train, n_test=n_test, k=k,
                               k_prime=k_prime, lipschitz=lipschitz, seed=seed,
                               include_rows=out is not None)
    summary = result["summary"]
    if out:
        columns = ["point_id", "h", "tau_local", "eps_dnnr", "eps_knn",
                   "abs_error", "abs_error_knn"]
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in result["rows"]:
                writer.writerow([row["point_id"]] +
                                [repr(float(row[c])) for c in columns[1:]])
        click.echo(f"wrote {out}")
    if fmt == "json":
        click.echo(json.dumps(summary, sort_keys=True))
    else:
        _echo_table(["field", "value"],
                    [[key, f"{val:.6g}" if isinstance(val, float) else val]
                     for key, val in summary.items()])


@cli.command()
@click.option("--model", "model_path", required=True, metavar="JSON")
@click.option("--dataset", required=True, metavar="CSV",
              help="Query rows to inspect.")
@click.option("--target-col", default=None, metavar="NAME|INDEX")
@click.option("--dims", default=None, metavar="I,J",
              help="Dimensions for trace projection; default 0,1.")
@click.option("--keep", default=None, type=int,
              help="Report the top-KEEP dimensions by relevance.")
@click.option("--out", default=None, metavar="JSON",
              help="Write prediction traces.")
@click.option("--relevance-out", default=None, metavar="CSV",
              help="Write per-dimension relevance statistics.")
@_format_option
@_server_option
def inspect(model_path, dataset, target_col, dims, keep, out, relevance_out,
            fmt, server):
    """Relevance distributions and neighborhood traces for a saved model."""
    bundle = _read_bundle(model_path)
    features, targets, _ = _load_queries(dataset, target_col)
    dim_pair = None
    if dims is not None:
        try:
            parts = [int(v) for v in dims.split(",")]
        except ValueError as exc:
            raise ConfigError(f"--dims must be two integers: {exc}") from exc
        if len(parts) != 2:
            raise ConfigError("--dims must be two integers, e.g. 0,1")
        dim_pair = (parts[0], parts[1])
    with ServiceClient(server) as client:
        model_id = client.import_model(bundle)["model_id"]
        result = client.inspect(model_id, features, targets=targets,
                                dims=dim_pair, keep=keep,
                                include_traces=out is not None or fmt == "json")
    relevance = result["relevance"]
    if relevance_out:
        with open(relevance_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dimension", "count", "median", "p25", "p75"])
            for row in relevance["per_dimension"]:
                writer.writerow([row["dimension"], row["count"],
                                 repr(row["median"]), repr(row["p25"]),
                                 repr(row["p75"])])
        click.echo(f"wrote {relevance_out}")
    if out:
        with open(out, "w") as fh:
            json.dump(result["traces"], fh, indent=1)
        click.echo(f"wrote {out}")
    if fmt == "json":
        click.echo(json.dumps({"relevance": relevance,
                               "selected_dimensions": result["selected_dimensions"]},
                              sort_keys=True))
    else:
        _echo_table(["dimension", "count", "median", "p25", "p75"],
                    [[r["dimension"], r["count"], f"{r['median']:.6g}",
                      f"{r['p25']:.6g}", f"{r['p75']:.6g}"]
                     for r in relevance["per_dimension"]])
        click.echo("ranked: " + ", ".join(str(r) for r in relevance["dimension_ranks"]))
        if result["selected_dimensions"] is not None:
            click.echo("selected: " +
                       ", ".join(str(r) for r in result["selected_dimensions"]))


@cli.command("gen-friedman1")
@click.option("--n-samples", default=5000, show_default=True, type=int)
@click.option("--n-features", default=10, show_default=True, type=int)
@click.option("--noise", default=0.0, show_default=True, type=float)
@click.option("--out", required=True, metavar="CSV")
@_seed_option
@_server_option
def gen_friedman1(n_samples, n_features, noise, out, seed, server):
    """Generate a Friedman-1 dataset and write it as CSV."""
    with ServiceClient(server) as client:
        payload = client.gen_friedman1(n_samples, n_features, noise, seed)
    data = Dataset(np.asarray(payload["features"]), np.asarray(payload["targets"]),
                   column_names=payload["column_names"],
                   target_name=payload["target_name"])
    write_csv(data, out)
    click.echo(f"wrote {out} ({data.n} rows, {data.d} feature columns)")


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


def main(argv: list[str] | None = None) -> int:
    """Run the CLI; returns the process exit code instead of raising."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


def run() -> None:
    sys.exit(main())
