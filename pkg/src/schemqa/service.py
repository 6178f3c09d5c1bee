"""HTTP service exposing the engine.

Endpoints:
    POST /v1/ingest                  bundle manifest -> index build report
    POST /v1/ask                     question -> final answer with full score breakdown
    GET  /v1/sessions/{id}/trace     trace archives for a session
    POST /v1/eval                    eval dataset -> metric report
    GET  /healthz                    liveness + corpus counts

Validation failures return 400 with a structured error body; engine
errors map to 400 (bad input) or 500 (unexpected). An optional static
bearer token guards the /v1 endpoints.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .engine import Engine
from .errors import SchemqaError
from .metrics import evaluate_records, load_eval_records
from .orchestrator import QueryRequest, Task


class AskBody(BaseModel):
    question: str
    session_id: str = "default"
    task: str = "OPEN_VQA"
    gold_answer: str | None = None
    mc_options: list[str] | None = None


class IngestBody(BaseModel):
    manifest_path: str


class EvalBody(BaseModel):
    dataset_path: str | None = None
    records: list[dict] | None = None


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="schemqa", version="0.1.0")
    token_env = engine.config.server.bearer_token_env
    expected_token = os.environ.get(token_env) if token_env else None

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return _error(400, "invalid_request", str(exc.errors()[:3]))

    @app.exception_handler(SchemqaError)
    async def engine_error_handler(request: Request, exc: SchemqaError):
        return _error(400, type(exc).__name__.lower(), str(exc))

    @app.middleware("http")
    async def auth_middleware(request: Request, call_next):
        if expected_token and request.url.path.startswith("/v1/"):
            header = request.headers.get("authorization", "")
            if header != f"Bearer {expected_token}":
                return _error(401, "unauthorized", "missing or invalid bearer token")
        return await call_next(request)

    @app.get("/healthz")
    def healthz() -> dict:
        return {
            "status": "ok",
            "documents": len(engine.doc_kind_map),
            "chunks": len(engine.index),
            "sessions": len(engine.session_ids()),
        }

    @app.post("/v1/ingest")
    def ingest(body: IngestBody) -> dict:
        return engine.ingest(body.manifest_path)

    @app.post("/v1/ask")
    def ask(body: AskBody):
        try:
            task = Task(body.task.upper())
        except ValueError:
            return _error(400, "invalid_request", f"unknown task {body.task!r}")
        try:
            request = QueryRequest(
                session_id=body.session_id,
                question=body.question,
                task=task,
                gold_answer=body.gold_answer,
                mc_options=tuple(body.mc_options) if body.mc_options else None,
            )
        except ValueError as exc:
            return _error(400, "invalid_request", str(exc))
        outcome = engine.ask(request)
        record = outcome.final.to_record()
        record["request_id"] = outcome.archive.request_id
        record["session_id"] = body.session_id
        return record

    @app.get("/v1/sessions/{session_id}/trace")
    def session_trace(session_id: str):
        archives = engine.archives(session_id)
        if not archives:
            return _error(404, "unknown_session", f"no traces for session {session_id!r}")
        return {"session_id": session_id, "traces": [a.to_record() for a in archives]}

    @app.post("/v1/eval")
    def run_eval(body: EvalBody):
        if body.records is not None:
            records = body.records
        elif body.dataset_path:
            records = load_eval_records(body.dataset_path)
        else:
            return _error(400, "invalid_request", "provide dataset_path or records")
        return evaluate_records(records).to_record()

    if engine.config.server.static_dir:
        from fastapi.staticfiles import StaticFiles

        # Mounted last so the API routes above keep precedence; this serves
        # the built browser client from the same origin (no CORS needed).
        app.mount("/", StaticFiles(directory=engine.config.server.static_dir, html=True))

    return app
