"""FastAPI application wrapping the session engine."""

from __future__ import annotations

import os
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..errors import ContractError
from ..loop import ExperimentConfig
from .engine import ConflictError, PhaseError, SessionEngine, UnknownSessionError
from .schemas import (
    EvaluationAck,
    EvaluationSubmission,
    EventView,
    MenuEntryView,
    PreferenceAck,
    PreferenceSubmission,
    QueryView,
    SessionCreatedResponse,
    SessionCreateRequest,
    SessionStateView,
    SessionSummaryView,
    schema_catalog,
)
from .store import list_session_ids, store_for


class SessionRegistry:
    """All live engines, keyed by session id; loads from disk on startup."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._engines: dict[str, SessionEngine] = {}
        self._lock = threading.Lock()

    def load_existing(self, resume: bool = True):
        for sid in list_session_ids(self.data_dir):
            engine = SessionEngine.load(store_for(self.data_dir, sid), sid)
            with self._lock:
                self._engines[sid] = engine
            if resume:
                engine.resume()

    def add(self, engine: SessionEngine):
        with self._lock:
            self._engines[engine.id] = engine

    def get(self, session_id: str) -> SessionEngine:
        with self._lock:
            engine = self._engines.get(session_id)
        if engine is None:
            raise UnknownSessionError(session_id)
        return engine

    def all(self) -> list[SessionEngine]:
        with self._lock:
            return list(self._engines.values())


def create_app(data_dir=None, static_dir=None, resume: bool = True) -> FastAPI:
    data_dir = Path(data_dir or os.environ.get("BOPREF_DATA_DIR", "./bopref-data"))
    registry = SessionRegistry(data_dir)
    registry.load_existing(resume=resume)

    app = FastAPI(title="bopref session service", version="1")
    app.state.registry = registry

    @app.exception_handler(UnknownSessionError)
    async def _unknown(request: Request, exc: UnknownSessionError):
        return JSONResponse(status_code=404, content={"error": f"unknown session {exc.args[0]!r}"})

    @app.exception_handler(PhaseError)
    async def _phase(request: Request, exc: PhaseError):
        return JSONResponse(status_code=409, content={"error": str(exc), "phase": exc.phase})

    @app.exception_handler(ConflictError)
    async def _conflict(request: Request, exc: ConflictError):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(ContractError)
    async def _contract(request: Request, exc: ContractError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.post("/sessions", response_model=SessionCreatedResponse, status_code=201)
    def create_session(body: SessionCreateRequest):
        config = ExperimentConfig.from_dict(body.config.model_dump())
        sid = uuid.uuid4().hex
        engine = SessionEngine.create(
            store_for(registry.data_dir, sid),
            config,
            body.evaluator.model_dump(),
            session_id=sid,
        )
        registry.add(engine)
        return {"id": engine.id, "state": engine.state_view()}

    @app.get("/sessions", response_model=list[SessionSummaryView])
    def list_sessions():
        out = []
        for engine in registry.all():
            view = engine.state_view()
            out.append(
                {
                    "id": view["id"],
                    "phase": view["phase"],
                    "iterations_done": view["iterations_done"],
                    "iterations_total": view["iterations_total"],
                    "num_evaluations": len(view["evaluations"]),
                }
            )
        return sorted(out, key=lambda v: v["id"])

    @app.get("/sessions/{session_id}", response_model=SessionStateView)
    def get_state(session_id: str):
        return registry.get(session_id).state_view()

    @app.get("/sessions/{session_id}/query", response_model=QueryView)
    def get_query(session_id: str):
        return registry.get(session_id).query_view()

    @app.post("/sessions/{session_id}/response", response_model=PreferenceAck)
    def post_response(session_id: str, body: PreferenceSubmission):
        return registry.get(session_id).submit_preference(body.m, body.a)

    @app.post("/sessions/{session_id}/evaluation", response_model=EvaluationAck)
    def post_evaluation(session_id: str, body: EvaluationSubmission):
        return registry.get(session_id).submit_evaluation(body.y)

    @app.get("/sessions/{session_id}/menu", response_model=list[MenuEntryView])
    def get_menu(session_id: str):
        return registry.get(session_id).menu_view()

    @app.get("/sessions/{session_id}/events", response_model=list[EventView])
    def get_events(session_id: str, since: int = Query(default=0, ge=0)):
        return registry.get(session_id).events_since(since)

    @app.get("/schema")
    def get_schema():
        return schema_catalog()

    static = Path(static_dir or os.environ.get("BOPREF_STATIC_DIR", "frontend/dist"))
    if static.is_dir():
        app.mount("/ui", StaticFiles(directory=static, html=True), name="ui")

    return app
