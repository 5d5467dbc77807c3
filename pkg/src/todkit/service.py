"""HTTP+JSON interface for the annotation service.

Endpoints:
  POST /studies                              -> {"study_id"}
  POST /studies/{id}/sessions                -> {"session_id"}
  GET  /studies/{id}/sessions/{sid}/next     -> item payload or {"done": true}
  POST /ratings                              -> {"status": "ok"}
  GET  /studies/{id}/report                  -> study report
  GET  /instructions                         -> {"text": rubric}
  GET  /health                               -> {"status": "ok", "version"}

Errors are returned as {"code", "message"}: 404 for unknown studies/items,
400 for invalid scores, insufficient corpora, and malformed requests.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .annotation import AnnotationService, DEFAULT_CRITERIA, RatingRecord, StudyConfig, rubric_text
from .errors import (
    InsufficientCorpusError,
    InvalidScoreError,
    ToolkitError,
    UnknownItemError,
    UnknownStudyError,
)

_STATUS_BY_ERROR = {
    UnknownStudyError: 404,
    UnknownItemError: 404,
    InvalidScoreError: 400,
    InsufficientCorpusError: 400,
}


class StudyConfigBody(BaseModel):
    single_domain: int = Field(ge=0)
    multi_domain: int = Field(ge=0)
    models: list[str]
    seed: int
    criteria: list[str] = list(DEFAULT_CRITERIA)


class RatingBody(BaseModel):
    session_id: str
    item_id: str
    criterion: str
    score: int
    comment: str = ""
    blinded_alias: str = ""


def create_app(service: AnnotationService) -> FastAPI:
    app = FastAPI(title="annotation service", version=__version__)
    # the annotator UI is a static page served from another origin
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ToolkitError)
    async def toolkit_error(_request: Request, exc: ToolkitError):
        status = _STATUS_BY_ERROR.get(type(exc), 400)
        return JSONResponse(status_code=status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(ValueError)
    async def value_error(_request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"code": "INVALID_REQUEST", "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400, content={"code": "INVALID_REQUEST", "message": str(exc.errors())}
        )

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.get("/instructions")
    async def instructions():
        return {"text": rubric_text()}

    @app.post("/studies", status_code=201)
    async def create_study(body: StudyConfigBody):
        config = StudyConfig(
            single_domain=body.single_domain,
            multi_domain=body.multi_domain,
            models=tuple(body.models),
            seed=body.seed,
            criteria=tuple(body.criteria),
        )
        return {"study_id": service.create_study(config)}

    @app.post("/studies/{study_id}/sessions", status_code=201)
    async def create_session(study_id: str):
        return {"session_id": service.create_session(study_id)}

    @app.get("/studies/{study_id}/sessions/{session_id}/next")
    async def next_item(study_id: str, session_id: str):
        return service.next_item(study_id, session_id)

    @app.post("/ratings")
    async def submit_rating(body: RatingBody):
        record = RatingRecord(
            session_id=body.session_id,
            item_id=body.item_id,
            criterion=body.criterion,
            score=body.score,
            comment=body.comment,
            blinded_alias=body.blinded_alias,
        )
        stored = service.submit_rating(record)
        return {"status": "ok", "timestamp": stored.timestamp}

    @app.get("/studies/{study_id}/report")
    async def study_report(study_id: str):
        return service.study_report(study_id)

    return app
