"""Client for the HTTP service, used by the command-line interface.

By default requests run in-process against a fresh application instance, so
the CLI works without a running server. Passing a base URL switches to a
plain HTTP client against a remote service; the surface is identical either
way. Service error envelopes are raised back as the library's own
ConfigError / DataError so callers keep one error vocabulary.
"""

from __future__ import annotations

import asyncio
from typing import Any

import httpx

from .errors import ConfigError, DataError


class ServiceClient:
    """Thin JSON client over the service API.

    Parameters
    ----------
    base_url : optional address of a running service, e.g.
        ``http://localhost:8000``. When omitted, an application instance is
        created in-process and served through an ASGI transport.
    """

    def __init__(self, base_url: str | None = None):
        self._async_client: httpx.AsyncClient | None = None
        self._sync_client: httpx.Client | None = None
        if base_url is None:
            from .service import create_app

            transport = httpx.ASGITransport(app=create_app())
            self._async_client = httpx.AsyncClient(
                transport=transport, base_url="http://dnnr.local", timeout=None)
        else:
            self._sync_client = httpx.Client(base_url=base_url, timeout=None)

    def close(self) -> None:
        if self._sync_client is not None:
            self._sync_client.close()
        if self._async_client is not None:
            asyncio.run(self._async_client.aclose())

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _send(self, method: str, path: str, payload: dict | None = None) -> Any:
        try:
            if self._sync_client is not None:
                response = self._sync_client.request(method, path, json=payload)
            else:
                async def _call():
                    return await self._async_client.request(method, path, json=payload)

                response = asyncio.run(_call())
        except ValueError as exc:
            # json cannot carry NaN or infinities
            raise DataError(f"request payload is not JSON-serializable: {exc}") from exc
        except httpx.HTTPError as exc:
            raise ConfigError(f"cannot reach service: {exc}") from exc
        if response.status_code >= 400:
            try:
                envelope = response.json()["error"]
                kind, message = envelope["type"], envelope["message"]
            except Exception:
                raise ConfigError(
                    f"service error {response.status_code}: {response.text[:500]}")
            if kind == "data":
                raise DataError(message)
            raise ConfigError(message)
        return response.json()

    def health(self) -> dict:
        return self._send("GET", "/health")

    def methods(self) -> list[str]:
        return self._send("GET", "/methods")["methods"]

    def fit(self, method: str, features, targets, column_names=None,
            target_name=None, hyperparameters=None, scale_features=None,
            seed: int = 0) -> dict:
        return self._send("POST", "/models", {
            "method": method,
            "features": features,
            "targets": targets,
            "column_names": column_names,
            "target_name": target_name,
            "hyperparameters": hyperparameters or {},
            "scale_features": scale_features,
            "seed": seed,
        })

    def import_model(self, bundle: dict) -> dict:
        return self._send("POST", "/models/import", {"bundle": bundle})

    def export_model(self, model_id: str) -> dict:
        return self._send("GET", f"/models/{model_id}/export")["bundle"]

    def model_info(self, model_id: str) -> dict:
        return self._send("GET", f"/models/{model_id}")

    def delete_model(self, model_id: str) -> dict:
        return self._send("DELETE", f"/models/{model_id}")

    def predict(self, model_id: str, queries) -> list[float]:
        body = self._send("POST", f"/models/{model_id}/predict",
                          {"queries": queries})
        return body["predictions"]

    def inspect(self, model_id: str, queries, targets=None, dims=None,
                keep=None, include_traces: bool = True) -> dict:
        return self._send("POST", f"/models/{model_id}/inspect", {
            "queries": queries,
            "targets": targets,
            "dims": dims,
            "keep": keep,
            "include_traces": include_traces,
        })

    def evaluate(self, method: str, features, targets, folds: int = 10,
                 seed: int = 0, grid=None, scale_features=None) -> dict:
        return self._send("POST", "/evaluate", {
            "method": method,
            "features": features,
            "targets": targets,
            "folds": folds,
            "seed": seed,
            "grid": grid,
            "scale_features": scale_features,
        })

    def sweep(self, axis: str, values, methods, seed: int = 0, folds: int = 5,
              n_samples: int = 5000, n_features: int = 10, noise: float = 0.0,
              grid=None) -> dict:
        return self._send("POST", "/sweep", {
            "axis": axis,
            "values": values,
            "methods": methods,
            "seed": seed,
            "folds": folds,
            "n_samples": n_samples,
            "n_features": n_features,
            "noise": noise,
            "grid": grid,
        })

    def bounds(self, n_train: int = 10000, n_test: int = 2000, k: int = 7,
               k_prime: int = 32, lipschitz: float = 40.0, seed: int = 1,
               include_rows: bool = True) -> dict:
        return self._send("POST", "/bounds", {
            "n_train": n_train,
            "n_test": n_test,
            "k": k,
            "k_prime": k_prime,
            "lipschitz": lipschitz,
            "seed": seed,
            "include_rows": include_rows,
        })

    def gen_friedman1(self, n_samples: int = 5000, n_features: int = 10,
                      noise: float = 0.0, seed: int = 0) -> dict:
        return self._send("POST", "/datasets/friedman1", {
            "n_samples": n_samples,
            "n_features": n_features,
            "noise": noise,
            "seed": seed,
        })
