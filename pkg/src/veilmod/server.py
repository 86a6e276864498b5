"""HTTP surface over ExperimentService.

Deliberately thin: every route parses the request, delegates to the service,
and maps domain errors to status codes. Request bodies are parsed by hand so
the documented status codes stay under our control.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .errors import (
    AuthError,
    ConflictError,
    ExpiredError,
    ForbiddenError,
    InvalidImageError,
    InvalidParameterError,
    NotFoundError,
    OutOfBoundsError,
    SchemaError,
    StateError,
    TooLargeError,
    ValidationError,
    VeilmodError,
)
from .report import canonical_report_bytes
from .service import ExperimentService

_STATUS_BY_ERROR = [
    (AuthError, 401),
    (ForbiddenError, 403),
    (NotFoundError, 404),
    (ConflictError, 409),
    (ExpiredError, 410),
    (TooLargeError, 413),
    (StateError, 409),
    (ValidationError, 400),
    (InvalidParameterError, 400),
    (SchemaError, 400),
    (OutOfBoundsError, 400),
    (InvalidImageError, 400),
]


def _status_for(exc: VeilmodError) -> int:
    for klass, status in _STATUS_BY_ERROR:
        if isinstance(exc, klass):
            return status
    return 500


def _bearer_token(request: Request) -> Optional[str]:
    header = request.headers.get("authorization", "")
    scheme, _, token = header.partition(" ")
    if scheme.lower() != "bearer" or not token.strip():
        return None
    return token.strip()


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception as exc:
        raise ValidationError("request body must be a JSON object") from exc
    if not isinstance(body, dict):
        raise ValidationError("request body must be a JSON object")
    return body


def create_app(service: ExperimentService, static_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="veilmod", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.service = service

    @app.exception_handler(VeilmodError)
    async def handle_domain_error(request: Request, exc: VeilmodError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    def worker_session(request: Request) -> str:
        return service.authenticate(_bearer_token(request))

    @app.post("/api/sessions", status_code=201)
    async def create_session(request: Request):
        body = await _json_body(request)
        return service.create_session(body.get("worker_id"), body.get("stage_id"))

    @app.get("/api/tasks/next")
    async def next_task(request: Request):
        session_id = worker_session(request)
        task = service.next_task(session_id)
        if task is None:
            return Response(status_code=204)
        return task

    @app.get("/api/images/{image_id}/tile")
    async def image_tile(image_id: str, request: Request):
        session_id = worker_session(request)
        payload, media = service.image_tile(
            session_id, image_id, dict(request.query_params)
        )
        return Response(content=payload, media_type=media)

    @app.get("/api/images/{image_id}")
    async def image_rendition(image_id: str, request: Request):
        session_id = worker_session(request)
        raw = request.query_params.get("sigma")
        if raw is None:
            raise ValidationError("sigma query parameter is required")
        try:
            sigma = float(raw)
        except ValueError:
            raise ValidationError(f"sigma must be numeric, got {raw!r}")
        payload, media = service.image_rendition(session_id, image_id, sigma)
        return Response(content=payload, media_type=media)

    @app.post("/api/responses", status_code=201)
    async def post_response(request: Request):
        session_id = worker_session(request)
        record = service.submit_response(session_id, await _json_body(request))
        return {"seq": record.seq}

    @app.post("/api/reveals", status_code=201)
    async def post_reveal(request: Request):
        session_id = worker_session(request)
        record = service.submit_reveal(session_id, await _json_body(request))
        return {"seq": record.seq}

    @app.post("/api/surveys", status_code=201)
    async def post_survey(request: Request):
        session_id = worker_session(request)
        record = service.submit_survey(session_id, await _json_body(request))
        return {"seq": record.seq}

    @app.get("/api/admin/report")
    async def admin_report(request: Request):
        service.authenticate_admin(_bearer_token(request))
        experiment = request.query_params.get("experiment")
        if experiment != service.config.experiment_id:
            raise NotFoundError(f"unknown experiment {experiment!r}")
        report = service.build_report()
        return Response(
            content=canonical_report_bytes(report), media_type="application/json"
        )

    @app.get("/api/instruments")
    async def instruments():
        from .survey import load_instrument_definitions

        return load_instrument_definitions()

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
