"""FastAPI application implementing the scoring wire protocol.

    POST /v1/score   {"model", "requests": [{"id", "text", "gold_token"?, "top_k"?}]}
    GET  /v1/vocab   [?model=...]
    GET  /healthz

Batches are all-or-nothing: any invalid request rejects the batch with a
400 naming the failed ids, so the client never sees silent partial
results.
"""

from __future__ import annotations

import logging
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from .model import MaskedLMBackend, RequestError

log = logging.getLogger(__name__)

DEFAULT_MAX_BATCH = 64


def _reject(message: str, failed_ids: list[str], status: int = 400) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message, "failed_ids": failed_ids})


def create_app(backend: MaskedLMBackend, max_batch: int = DEFAULT_MAX_BATCH) -> FastAPI:
    app = FastAPI(title="maskserve", version="0.1.0")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "model": backend.handle.to_json()}

    @app.get("/v1/vocab")
    def vocab(model: Optional[str] = Query(default=None)):
        if model is not None and model != backend.name:
            return JSONResponse(
                status_code=404,
                content={"error": f"model {model!r} not served here (loaded: {backend.name!r})"},
            )
        return {"tokens": backend.vocab_export()}

    @app.post("/v1/score")
    async def score(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return _reject("request body is not valid JSON", [])

        requests_ = payload.get("requests")
        if not isinstance(requests_, list) or not requests_:
            return _reject("'requests' must be a non-empty list", [])
        ids = [str(r.get("id", i)) for i, r in enumerate(requests_)]
        if payload.get("model") != backend.name:
            return _reject(
                f"model {payload.get('model')!r} not served here (loaded: {backend.name!r})", ids
            )
        if len(requests_) > max_batch:
            return _reject(f"batch of {len(requests_)} exceeds maximum {max_batch}", ids)

        results = []
        failed: list[tuple[str, str]] = []
        for request_id, entry in zip(ids, requests_):
            text = entry.get("text")
            if not isinstance(text, str):
                failed.append((request_id, "missing text"))
                continue
            top_k = int(entry.get("top_k", 10))
            if top_k < 1:
                failed.append((request_id, "top_k must be >= 1"))
                continue
            try:
                result = backend.score(text, gold_token=entry.get("gold_token"), top_k=top_k)
            except RequestError as exc:
                failed.append((request_id, str(exc)))
                continue
            results.append({"id": request_id, **result})

        if failed:
            detail = "; ".join(f"{rid}: {reason}" for rid, reason in failed[:5])
            return _reject(f"batch rejected ({detail})", [rid for rid, _ in failed])
        return {"results": results}

    return app
