"""HTTP API.

``POST /api/link`` takes ``{"text": ..., "spans": [[start, length], ...]}``
(``spans`` optional; when present only those spans are disambiguated) and
returns one record per linked mention, ordered by start offset::

    [start, length, mention, entity, ed_confidence, md_confidence, tag]

Offsets count Unicode code points. ``md_confidence`` and ``tag`` are null
unless the spans supplied them.
"""

import asyncio
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from functools import partial
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .errors import SpanError

log = logging.getLogger(__name__)

DEFAULT_MAX_BODY = 1_000_000


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _link(linker, text: str, spans):
    return [a.to_record() for a in linker.link(text, spans)]


def create_app(linker=None, max_body_bytes: int = DEFAULT_MAX_BODY, workers: int = 4) -> FastAPI:
    """Build the app. With ``linker=None`` the service reports ``loading`` and
    answers 503 until ``app.state.linker`` is set."""
    pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="rellink")

    @asynccontextmanager
    async def lifespan(_app):
        yield
        pool.shutdown(wait=False)

    app = FastAPI(title="rellink", version=__version__, lifespan=lifespan)
    app.state.linker = linker

    @app.get("/health")
    def health():
        current = app.state.linker
        if current is None:
            return {"status": "loading", "version": __version__}
        store = current.store
        return {
            "status": "ok",
            "version": __version__,
            "store_loaded": True,
            "model_loaded": True,
            "store_version": store.version,
            "dim": store.dim,
            "entities": store.entity_count,
            "surfaces": store.surface_count,
            "preload": store.preload,
        }

    @app.post("/api/link")
    async def link(request: Request):
        current = app.state.linker
        if current is None:
            return _error(503, "store and model are not loaded yet")
        declared = request.headers.get("content-length")
        if declared is not None and declared.isdigit() and int(declared) > max_body_bytes:
            return _error(413, f"request body exceeds {max_body_bytes} bytes")
        body = await request.body()
        if len(body) > max_body_bytes:
            return _error(413, f"request body exceeds {max_body_bytes} bytes")
        try:
            payload = json.loads(body)
        except (ValueError, UnicodeDecodeError):
            return _error(400, "body is not valid JSON")
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
            return _error(400, "body must be an object with a string 'text'")
        spans = payload.get("spans")
        if spans is not None and not isinstance(spans, list):
            return _error(400, "'spans' must be a list of [start, length] pairs")
        loop = asyncio.get_running_loop()
        try:
            records = await loop.run_in_executor(pool, partial(_link, current, payload["text"], spans))
        except SpanError as exc:
            return _error(400, str(exc))
        return JSONResponse(records)

    return app


def serve(linker, host: str = "127.0.0.1", port: int = 5555, workers: int = 4,
          max_body_bytes: int = DEFAULT_MAX_BODY) -> None:
    import uvicorn

    uvicorn.run(create_app(linker, max_body_bytes=max_body_bytes, workers=workers),
                host=host, port=port, log_level="info")
