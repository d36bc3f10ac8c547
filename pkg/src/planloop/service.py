"""HTTP face of the interactive loop, consumed by the web UI and CLI.

Errors come back as problem-detail JSON with stable machine-readable
codes so clients can branch without parsing prose.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import formats
from .config import AppConfig, backend_factory, build_provider
from .instantiate import UnknownSpotId
from .knapsack import EmptyInstance
from .llm import AllBackendsFailed, BackendUnavailable, LengthMismatch, ParseFailure
from .model import InstanceError
from .opsolver import InstanceTooLarge
from .providers import ApiUnavailable, NotFound
from .report import itinerary_text
from .session import (
    PreconditionError,
    SessionEngine,
    SessionNotFound,
    SessionState,
    SessionStore,
    UnknownCandidateId,
)

ERROR_CODES: list[tuple[type[Exception], int, str]] = [
    (SessionNotFound, 404, "unknown_session"),
    (UnknownCandidateId, 422, "unknown_candidate"),
    (UnknownSpotId, 422, "unknown_spot"),
    (PreconditionError, 422, "precondition_failed"),
    (InstanceTooLarge, 422, "instance_too_large"),
    (InstanceError, 422, "invalid_instance"),
    (EmptyInstance, 422, "empty_instance"),
    (LengthMismatch, 502, "backend_length_mismatch"),
    (ParseFailure, 502, "backend_parse_failure"),
    (AllBackendsFailed, 502, "all_backends_failed"),
    (BackendUnavailable, 502, "backend_unavailable"),
    (ApiUnavailable, 502, "provider_unavailable"),
    (NotFound, 404, "not_found"),
    (ValueError, 422, "invalid_request"),
]


class CreateSessionBody(BaseModel):
    task: str = "trip"
    session_id: str | None = None


class EnumerateBody(BaseModel):
    preference: str
    backends: int = Field(default=1, ge=1, le=8)


class SelectBody(BaseModel):
    ids: list[str]


class OptimizeBody(BaseModel):
    preference: str = ""
    budget_min: float | None = None
    limit_kcal: float | None = None


def session_view(state: SessionState) -> dict:
    view = state.to_dict()
    if state.last_solution is not None and state.task == "trip":
        view["plan_text"] = itinerary_text(state.last_instance, state.last_solution)
    return view


def create_app(config: AppConfig | None = None, engine: SessionEngine | None = None) -> FastAPI:
    config = config or AppConfig()
    if engine is None:
        engine = SessionEngine(
            store=SessionStore(config.store_path),
            provider=build_provider(config.provider),
            backend_factory=backend_factory(config),
        )
    app = FastAPI(title="planloop", version="0.1.0")
    app.state.engine = engine

    def problem(status: int, code: str, detail: str) -> JSONResponse:
        return JSONResponse(
            status_code=status,
            content={
                "type": "about:blank",
                "title": code.replace("_", " "),
                "status": status,
                "code": code,
                "detail": detail,
            },
            media_type="application/problem+json",
        )

    @app.exception_handler(Exception)
    async def handle_known(request: Request, exc: Exception):
        for etype, status, code in ERROR_CODES:
            if isinstance(exc, etype):
                return problem(status, code, str(exc))
        return problem(500, "internal_error", str(exc))

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        state = engine.create_session(body.task, body.session_id)
        return session_view(state)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return session_view(engine.get(session_id))

    @app.post("/sessions/{session_id}/enumerate")
    def enumerate_step(session_id: str, body: EnumerateBody):
        state = engine.step_enumerate(session_id, body.preference, body.backends)
        return session_view(state)

    @app.post("/sessions/{session_id}/select")
    def select_step(session_id: str, body: SelectBody):
        state = engine.step_select(session_id, body.ids)
        return session_view(state)

    @app.post("/sessions/{session_id}/optimize")
    def optimize_step(session_id: str, body: OptimizeBody):
        state = engine.get(session_id)
        budget = body.budget_min if state.task == "trip" else body.limit_kcal
        if budget is None:
            budget = body.budget_min if body.budget_min is not None else body.limit_kcal
        if budget is None:
            raise PreconditionError("budget_min or limit_kcal is required")
        state = engine.step_optimize(session_id, body.preference, budget)
        return session_view(state)

    @app.get("/sessions/{session_id}/plan")
    def get_plan(session_id: str):
        state = engine.get(session_id)
        if state.last_solution is None:
            return problem(404, "no_plan", "session has no solved plan yet")
        out = {
            "session_id": state.session_id,
            "task": state.task,
            "budget": state.budget,
            "instance": state.last_instance,
            "solution": state.last_solution,
        }
        if state.task == "trip":
            out["plan_text"] = itinerary_text(state.last_instance, state.last_solution)
        return out

    if config.static_dir and Path(config.static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app
