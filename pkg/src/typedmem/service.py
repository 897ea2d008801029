"""HTTP service exposing ingest/query/list over one store file."""

from __future__ import annotations

import logging
import threading
from collections import defaultdict
from datetime import datetime, timezone
from typing import Any, Optional

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .core import StoreType, Turn, record_to_dict
from .engine import MemoryEngine
from .errors import (
    DimensionError,
    ParseError,
    ProviderError,
    StoreError,
    TemporalError,
    TypedMemError,
    ValidationError,
)

logger = logging.getLogger(__name__)


class TurnBody(BaseModel):
    text: str = Field(min_length=1)
    timestamp: Optional[str] = None


class QueryBody(BaseModel):
    question: str = Field(min_length=1)
    k: Optional[int] = Field(default=None, ge=1)
    budget: Optional[int] = Field(default=None, ge=1)
    speakers: Optional[list[str]] = None


def _error(status: int, code: str, message: str, field: str | None = None) -> JSONResponse:
    body: dict[str, Any] = {"code": code, "message": message}
    if field:
        body["field"] = field
    return JSONResponse(status_code=status, content=body)


_STATUS = (
    (ProviderError, 502, "provider_error"),
    (ParseError, 502, "provider_output_error"),
    (StoreError, 500, "store_error"),
    (DimensionError, 500, "dimension_error"),
    (ValidationError, 400, "validation_error"),
    (TemporalError, 400, "validation_error"),
)


def create_app(engine: MemoryEngine) -> FastAPI:
    """Wrap ``engine``. Ingestion is serialized per user; queries run concurrently."""
    app = FastAPI(title="typedmem", version="0.1.0")
    locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
    locks_guard = threading.Lock()
    counters: dict[str, int] = defaultdict(int)

    def user_lock(user_id: str) -> threading.Lock:
        with locks_guard:
            return locks[user_id]

    @app.exception_handler(RequestValidationError)
    async def on_request_validation(_: Request, exc: RequestValidationError) -> JSONResponse:
        first = exc.errors()[0] if exc.errors() else {}
        loc = [str(p) for p in first.get("loc", ()) if p != "body"]
        field = ".".join(loc) or None
        return _error(400, "validation_error", f"{field or 'body'}: {first.get('msg', 'invalid request')}", field)

    @app.exception_handler(TypedMemError)
    async def on_domain_error(_: Request, exc: TypedMemError) -> JSONResponse:
        for cls, status, code in _STATUS:
            if isinstance(exc, cls):
                return _error(status, code, str(exc), getattr(exc, "field", None))
        return _error(500, "internal_error", str(exc))

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/users/{user_id}/turns")
    def post_turn(user_id: str, body: TurnBody) -> dict[str, Any]:
        with user_lock(user_id):
            stamp = body.timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
            turn = Turn(user_id, body.text, stamp)
            outcome = engine.ingest_turn(turn, counters[user_id])
            counters[user_id] += 1
        return {"mask": outcome.mask.to_dict(), "record_ids": outcome.record_ids, "errors": outcome.errors}

    @app.post("/users/{user_id}/query")
    def post_query(user_id: str, body: QueryBody) -> dict[str, Any]:
        speakers = body.speakers or [user_id]
        return engine.query(body.question, speakers, body.k, body.budget).to_dict()

    @app.get("/users/{user_id}/memories")
    def get_memories(user_id: str, type: Optional[str] = Query(default=None)) -> dict[str, Any]:
        try:
            kinds = [StoreType(type)] if type else list(StoreType)
        except ValueError as exc:
            raise ValidationError(f"type must be one of epi, sem, pro; got {type!r}", "type") from exc
        memories = []
        for kind in kinds:
            for record in engine.store.list(kind, user_id):
                memories.append({"store_type": kind.value, **record_to_dict(record)})
        return {"memories": memories}

    return app


def serve(engine: MemoryEngine, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(engine), host=host, port=port, log_level="info")
