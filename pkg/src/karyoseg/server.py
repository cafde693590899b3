"""HTTP API over sessions. Thin by design: every endpoint maps onto one
session operation, so the CLI and the browser exercise identical code."""

from __future__ import annotations

import base64
import json
import os
import threading
from pathlib import Path

from fastapi import FastAPI, File, Form, Request, Response, UploadFile
from fastapi.responses import JSONResponse

from .classify import ScoreMatrix
from .config import PipelineConfig
from .errors import ConflictError, InvalidArgumentError, KaryosegError, NotFoundError
from .raster import encode_png
from .session import Session, load_session, run_pipeline
from .watershed import SeedSet

DATA_DIR_ENV = "KARYOSEG_DATA"


def _status_for(exc: KaryosegError) -> int:
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, ConflictError):
        return 409
    return 400


class SessionStore:
    """In-memory cache over the session directories. Misses fall back to
    disk, so a restarted server picks up where it left off."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self._sessions: dict = {}
        self._locks: dict = {}
        self._guard = threading.Lock()

    def add(self, session: Session) -> None:
        with self._guard:
            self._sessions[session.id] = session
            self._locks.setdefault(session.id, threading.Lock())

    def get(self, session_id: str) -> Session:
        with self._guard:
            cached = self._sessions.get(session_id)
        if cached is not None:
            return cached
        session = load_session(self.data_dir / session_id)
        self.add(session)
        return session

    def lock(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())


def _png_b64(image) -> str:
    return base64.b64encode(encode_png(image)).decode("ascii")


async def _json_body(request: Request):
    try:
        return await request.json()
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"request body is not valid JSON: {exc}") from exc


def create_app(data_dir=None) -> FastAPI:
    data_dir = Path(data_dir or os.environ.get(DATA_DIR_ENV, "karyoseg-data"))
    store = SessionStore(data_dir)
    app = FastAPI(title="karyoseg")

    @app.exception_handler(KaryosegError)
    async def _domain_error(request: Request, exc: KaryosegError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"code": exc.code, "message": str(exc)},
        )

    @app.post("/sessions", status_code=201)
    async def create_session(
        image: UploadFile = File(...),
        config: str = Form(None),
    ):
        if config:
            try:
                cfg = PipelineConfig.from_json(json.loads(config))
            except json.JSONDecodeError as exc:
                raise InvalidArgumentError(f"config is not valid JSON: {exc}") from exc
        else:
            cfg = PipelineConfig()
        data = await image.read()
        session = run_pipeline(data, cfg, data_dir)
        store.add(session)
        return session.summary()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return store.get(session_id).summary()

    @app.get("/sessions/{session_id}/crops/{crop_id}/image")
    def get_crop_image(session_id: str, crop_id: str):
        crop = store.get(session_id).crop(crop_id)
        return Response(content=encode_png(crop.image), media_type="image/png")

    @app.post("/sessions/{session_id}/crops/{crop_id}/seeds")
    async def post_seeds(session_id: str, crop_id: str, request: Request):
        seeds = SeedSet.from_json(await _json_body(request))
        session = store.get(session_id)
        with store.lock(session_id):
            segmap = session.apply_seeds(crop_id, seeds)
        return {
            "width": segmap.labels.shape[1],
            "height": segmap.labels.shape[0],
            "png_base64": _png_b64(segmap.to_gray()),
            "regions": segmap.stats(),
            "lines": int(segmap.lines.sum()),
        }

    @app.post("/sessions/{session_id}/crops/{crop_id}/separate")
    async def post_separate(session_id: str, crop_id: str, request: Request):
        body = await _json_body(request)
        if not isinstance(body, dict) or "method" not in body:
            raise InvalidArgumentError("body must be an object with a 'method' field")
        method = int(body["method"])
        session = store.get(session_id)
        with store.lock(session_id):
            outputs = session.separate(crop_id, method)
        return {
            "units": [
                {
                    "unit_id": sep.unit_id,
                    "label": sep.label,
                    "provenance": list(sep.provenance),
                    "png_base64": _png_b64(sep.image),
                }
                for sep in outputs
            ]
        }

    @app.post("/sessions/{session_id}/scores")
    async def post_scores(session_id: str, request: Request):
        body = await _json_body(request)
        session = store.get(session_id)
        with store.lock(session_id):
            if isinstance(body, dict) and body.get("provider") == "toy":
                matrix = session.set_scores_toy()
            else:
                matrix = session.set_scores(ScoreMatrix.from_json(body))
        return {"rows": matrix.count, "classes": matrix.classes}

    @app.post("/sessions/{session_id}/distribute")
    def post_distribute(session_id: str):
        session = store.get(session_id)
        with store.lock(session_id):
            result = session.run_distribution()
        report = result.to_json()
        report["balanced"] = result.balanced
        return report

    @app.get("/sessions/{session_id}/karyogram")
    def get_karyogram(session_id: str):
        session = store.get(session_id)
        with store.lock(session_id):
            layout, png = session.karyogram()
        layout["png_base64"] = base64.b64encode(png).decode("ascii")
        return layout

    return app
