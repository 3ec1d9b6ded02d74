"""HTTP surface: streaming research runs, report history, history search,
and safe config introspection.

The research endpoint answers NDJSON: one pipeline event per line, flushed
as produced, ending right after the terminal event. Validation failures are
plain 400s before any streaming starts; setup failures discovered once the
stream is open arrive as streamed error events instead.
"""

from __future__ import annotations

import asyncio
import contextlib
import logging
from typing import AsyncIterator

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from .agents import run_pipeline
from .config import ServerSettings, build_deps, merge_overrides
from .domain import ConfigError, EventType, PipelineEvent
from .embeddings import Embedder
from .store import NotFound, ReportStore

logger = logging.getLogger(__name__)

DEFAULT_LIST_LIMIT = 20
DEFAULT_SEARCH_K = 5

_TERMINAL = {EventType.DONE, EventType.ERROR}


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=400)


def safe_config(settings: ServerSettings) -> dict:
    """Config view with the secret reduced to a boolean."""
    config = settings.config
    return {
        "provider": config.provider.value,
        "model": config.model,
        "base_url": config.base_url,
        "embedding_mode": config.embedding_mode.value,
        "api_key_set": config.api_key is not None and config.api_key != "",
    }


def _parse_positive_int(raw: str | None, default: int, name: str) -> int:
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer") from None
    if value < 1:
        raise ValueError(f"{name} must be >= 1")
    return value


def create_app(
    settings: ServerSettings, store: ReportStore | None = None
) -> FastAPI:
    app = FastAPI(title="researchpilot", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    if store is None:
        store = ReportStore(settings.db_path)
    app.state.settings = settings
    app.state.store = store

    @app.get("/config")
    async def get_config() -> JSONResponse:
        return JSONResponse(safe_config(settings))

    @app.post("/research")
    async def research(request: Request) -> Response:
        try:
            body = await request.json()
        except Exception:  # noqa: BLE001 - any undecodable body is the same 400
            return _bad_request("request body must be valid JSON")
        if not isinstance(body, dict):
            return _bad_request("request body must be a JSON object")
        question = body.get("question")
        if not isinstance(question, str) or not question.strip():
            return _bad_request("question must be a nonempty string")
        overrides = body.get("overrides") or {}
        if not isinstance(overrides, dict):
            return _bad_request("overrides must be a JSON object")
        try:
            config = merge_overrides(settings.config, overrides)
        except ConfigError as exc:
            return _bad_request(str(exc))
        deps = build_deps(settings, config, store)

        queue: asyncio.Queue[PipelineEvent] = asyncio.Queue()

        async def stream() -> AsyncIterator[str]:
            task = asyncio.create_task(
                run_pipeline(question, config, deps, emit=queue.put_nowait)
            )
            try:
                while True:
                    event = await queue.get()
                    yield event.to_json_line() + "\n"
                    if event.type in _TERMINAL:
                        break
                await task
            finally:
                if not task.done():
                    task.cancel()
                    with contextlib.suppress(Exception, asyncio.CancelledError):
                        await task

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    @app.get("/reports/search")
    async def search_reports(request: Request) -> JSONResponse:
        query = request.query_params.get("q")
        if not query:
            return _bad_request("query parameter q is required")
        try:
            k = _parse_positive_int(request.query_params.get("k"), DEFAULT_SEARCH_K, "k")
        except ValueError as exc:
            return _bad_request(str(exc))
        embed = Embedder(settings.config).embed
        hits = await asyncio.to_thread(store.search_reports, query, k, embed)
        return JSONResponse(
            {
                "hits": [
                    {
                        "report_id": h.report_id,
                        "question": h.question,
                        "score": h.score,
                        "created_at": h.created_at,
                        "match_kind": h.match_kind,
                    }
                    for h in hits
                ]
            }
        )

    @app.get("/reports")
    async def list_reports(request: Request) -> JSONResponse:
        try:
            limit = _parse_positive_int(
                request.query_params.get("limit"), DEFAULT_LIST_LIMIT, "limit"
            )
        except ValueError as exc:
            return _bad_request(str(exc))
        summaries = await asyncio.to_thread(store.list_reports, limit)
        return JSONResponse(
            {
                "reports": [
                    {
                        "report_id": s.report_id,
                        "question": s.question,
                        "created_at": s.created_at,
                    }
                    for s in summaries
                ]
            }
        )

    @app.get("/reports/{report_id}")
    async def get_report(report_id: str) -> Response:
        try:
            payload = await asyncio.to_thread(store.get_payload, report_id)
        except NotFound as exc:
            return JSONResponse({"error": str(exc)}, status_code=404)
        # the stored canonical document, byte-exact
        return Response(content=payload, media_type="application/json")

    return app
