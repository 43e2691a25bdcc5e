"""HTTP face of the validation workflow, for the annotation frontend.

Endpoints (JSON over localhost): register an annotator, fetch the next task,
submit a judgment, query progress, run the overly-broad advisory check, read
the aggregate report, and export split manifests.  Served task documents
never contain the audit category.  Image assets stream verbatim from a
configured read-only directory.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel, Field

from .rank_store import DataError
from .validation import (
    AnnotationRecord,
    TraceStep,
    ValidationStore,
    parse_policy,
)


class RegisterBody(BaseModel):
    annotator: str
    batch: list[str] = Field(default_factory=list)


class TraceStepBody(BaseModel):
    step: str
    outcome: str


class JudgmentBody(BaseModel):
    query: str
    annotator: str
    timestamp: float
    valid: bool
    issues: list[str] = Field(default_factory=list)
    trace: list[TraceStepBody]
    note: str | None = None


class AdvisoryBody(BaseModel):
    query: str
    marks: list[str] = Field(default_factory=list)


def create_app(
    store: ValidationStore,
    asset_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="ciraudit validation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    assets = None if asset_dir is None else Path(asset_dir).resolve()

    def fail(exc: DataError) -> HTTPException:
        return HTTPException(status_code=422, detail=str(exc))

    @app.post("/annotators/register")
    def register(body: RegisterBody) -> dict:
        try:
            store.register_annotator(body.annotator, body.batch)
        except DataError as exc:
            raise fail(exc) from exc
        return {"registered": body.annotator}

    @app.get("/tasks/next")
    def next_task(annotator: str) -> dict:
        try:
            task = store.next_task(annotator)
        except DataError as exc:
            raise fail(exc) from exc
        if task is None:
            return {"done": True, "task": None}
        return {"done": False, "task": task.to_document()}

    @app.post("/judgments")
    def submit(body: JudgmentBody) -> dict:
        record = AnnotationRecord(
            query_id=body.query,
            annotator_id=body.annotator,
            timestamp=body.timestamp,
            issues=frozenset(body.issues),
            valid=body.valid,
            decision_trace=tuple(
                TraceStep(step=t.step, outcome=t.outcome) for t in body.trace
            ),
            note=body.note,
        )
        try:
            return store.submit(record)
        except DataError as exc:
            raise fail(exc) from exc

    @app.get("/progress")
    def progress(annotator: str) -> dict:
        try:
            return store.progress(annotator)
        except DataError as exc:
            raise fail(exc) from exc

    @app.post("/advisory")
    def advisory(body: AdvisoryBody) -> dict:
        try:
            return store.check_advisory(body.query, body.marks)
        except DataError as exc:
            raise fail(exc) from exc

    @app.get("/reports/aggregate")
    def aggregate(policy: str = "single_assignee") -> dict:
        try:
            labels = store.aggregate(parse_policy(policy))
        except DataError as exc:
            raise fail(exc) from exc
        return {
            "policy": policy,
            "labels": {
                qid: {
                    "valid": lab.valid,
                    "issues": sorted(lab.issues),
                    "raters": lab.rater_count,
                }
                for qid, lab in labels.items()
            },
        }

    @app.get("/splits/{split_id}")
    def split(split_id: str, policy: str = "single_assignee") -> dict:
        key = {"full": "Full", "sf": "SF", "v": "V"}.get(split_id.lower())
        if key is None:
            raise HTTPException(status_code=404, detail=f"unknown split {split_id!r}")
        try:
            manifests = store.export(parse_policy(policy), include_v=key == "V")
            return manifests[key].to_document()
        except DataError as exc:
            raise fail(exc) from exc

    if assets is not None:

        @app.get("/assets/{ref:path}")
        def asset(ref: str) -> FileResponse:
            target = (assets / ref).resolve()
            if not str(target).startswith(str(assets)) or not target.is_file():
                raise HTTPException(status_code=404, detail="no such asset")
            return FileResponse(target)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
