"""HTTP API over the session engine: image upload, session lifecycle,
text commands, masks, history exports, and Dice trajectories.

The API is a pure facade: every state transition it offers is an engine
operation. Commands on one session are serialized by a per-session lock;
distinct sessions proceed concurrently (sync endpoints run on the
threadpool, so a slow backend call does not block other sessions).
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse, RedirectResponse
from pydantic import BaseModel

from . import commands as cm
from .backends import RemoteBackend, SyntheticBackend
from .core import BinMask, WindowSpec
from .engine import Session, SessionConfig, DEFAULT_CONFIG, create_session
from .errors import (
    BackendUnavailable,
    EmptyBox,
    EngineError,
    LimisError,
    MissingGroundTruth,
    NoDetection,
    ParseError,
    ScriptExhausted,
    StaleProposal,
    UnknownComponent,
    UnknownLabel,
    UnknownStep,
)
from .imaging import DEFAULT_PRESETS, WindowPresets, load_window_presets, window_normalize
from .maskops import mask_to_png, rle_encode
from .metrics import dice_trajectory
from .volume_io import GroundTruth, Volume, read_nifti, render_phantom, scene_from_json, slice_transversal


@dataclass
class ServiceConfig:
    backend: str = "synthetic"  # "synthetic" | "remote"
    remote_url: str | None = None
    presets_path: str | None = None
    data_dir: str | None = None
    ui_dir: str | None = None
    session_config: SessionConfig = field(default_factory=SessionConfig)


@dataclass
class ImageEntry:
    volume: Volume
    gt: GroundTruth | None
    source: str  # "nifti" | "phantom"


class CreateSessionBody(BaseModel):
    image_id: str
    slice: int
    target_label: str
    backend: str | None = None


class CommandBody(BaseModel):
    text: str


class RevertBody(BaseModel):
    to: int


class FinalBody(BaseModel):
    step: int


def _error_response(exc: Exception) -> JSONResponse:
    if isinstance(exc, ParseError):
        return JSONResponse(status_code=400, content={
            "error": "parse_error", "parse_error": exc.message,
            "suggestions": exc.suggestions,
        })
    if isinstance(exc, (UnknownStep, UnknownLabel, MissingGroundTruth, KeyError)):
        return JSONResponse(status_code=404, content={"error": str(exc)})
    if isinstance(exc, StaleProposal):
        return JSONResponse(status_code=409, content={"error": str(exc)})
    if isinstance(exc, (ScriptExhausted, UnknownComponent, EmptyBox, NoDetection, EngineError)):
        return JSONResponse(status_code=409, content={"error": str(exc)})
    if isinstance(exc, BackendUnavailable):
        return JSONResponse(status_code=503, content={"error": str(exc)})
    if isinstance(exc, (LimisError, ValueError)):
        return JSONResponse(status_code=400, content={"error": str(exc)})
    raise exc


def _step_doc(session: Session, outcome) -> dict:
    doc = {
        "step_id": outcome.step.id if outcome.step else None,
        "parent_id": outcome.step.parent_id if outcome.step else None,
        "op": outcome.kind,
        "cursor": outcome.cursor,
        "final": outcome.final,
    }
    state = outcome.step.state if outcome.step else session.cursor_step.state
    doc["mask_rle"] = rle_encode(state.mask)
    doc["box"] = list(state.box.as_tuple())
    doc["tau"] = state.tau
    doc["window"] = {"center": state.window.center, "width": state.window.width}
    doc["margin"] = state.margin_px
    if session.dice_log is not None and outcome.step is not None:
        doc["dice"] = session.dice_log[outcome.step.id]
    if outcome.critical_points is not None:
        doc["critical_points"] = [
            {"index": i, "x": p.x, "y": p.y, "ambiguity": p.ambiguity}
            for i, p in enumerate(outcome.critical_points)
        ]
    if outcome.previews is not None:
        doc["previews"] = outcome.previews
    if outcome.help_text is not None:
        doc["help"] = outcome.help_text
    if outcome.strategy is not None:
        doc["strategy"] = outcome.strategy.value
        doc["strategy_remaining"] = outcome.strategy_remaining
    return doc


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    presets = (load_window_presets(config.presets_path)
               if config.presets_path else DEFAULT_PRESETS)
    app = FastAPI(title="limis", docs_url=None, redoc_url=None)
    images: dict[str, ImageEntry] = {}
    sessions: dict[str, Session] = {}
    locks: dict[str, threading.Lock] = {}
    counter = {"session": 0}
    registry_lock = threading.Lock()

    def _backend(kind: str | None):
        kind = kind or config.backend
        if kind == "synthetic":
            return SyntheticBackend()
        if kind == "remote":
            if not config.remote_url:
                raise BackendUnavailable("no remote backend configured")
            return RemoteBackend(config.remote_url)
        raise ValueError(f"unknown backend '{kind}'")

    def _session(session_id: str) -> Session:
        if session_id not in sessions:
            raise UnknownStep(f"unknown session '{session_id}'")
        return sessions[session_id]

    def _persist(session: Session):
        # sessions live in memory; the only on-disk persistence is the
        # export file, refreshed after every state change when configured
        if not config.data_dir:
            return
        path = Path(config.data_dir)
        path.mkdir(parents=True, exist_ok=True)
        target = path / f"{session.id}.json"
        tmp = target.with_suffix(".json.tmp")
        tmp.write_text(session.export_json())
        tmp.replace(target)

    @app.exception_handler(LimisError)
    async def _limis_error(_request, exc):
        return _error_response(exc)

    @app.post("/v1/images")
    async def post_image(request: Request):
        body = await request.body()
        try:
            try:
                scene = scene_from_json(body)
                volume, gt = render_phantom(scene)
                entry = ImageEntry(volume=volume, gt=gt, source="phantom")
            except (ValueError, KeyError, json.JSONDecodeError, UnicodeDecodeError):
                entry = ImageEntry(volume=read_nifti(body), gt=None, source="nifti")
        except LimisError as exc:
            return _error_response(exc)
        image_id = hashlib.sha256(body).hexdigest()[:16]
        with registry_lock:
            images[image_id] = entry
        nx, ny, nz = entry.volume.dims
        return {"image_id": image_id, "width": nx, "height": ny, "slices": nz,
                "source": entry.source}

    @app.post("/v1/sessions")
    def post_session(body: CreateSessionBody):
        if body.image_id not in images:
            return JSONResponse(status_code=404,
                                content={"error": f"unknown image '{body.image_id}'"})
        entry = images[body.image_id]
        nx, ny, nz = entry.volume.dims
        if not 0 <= body.slice < nz:
            return JSONResponse(status_code=404,
                                content={"error": f"slice {body.slice} outside [0, {nz})"})
        image = slice_transversal(entry.volume, body.slice)
        gt_mask: BinMask | None = None
        if entry.gt is not None:
            gt_mask = entry.gt.mask_for(body.slice, body.target_label)
        try:
            backend = _backend(body.backend)
            with registry_lock:
                counter["session"] += 1
                session_id = f"sess-{counter['session']}"
            session = create_session(
                image, body.target_label, backend,
                presets=presets, config=config.session_config, gt=gt_mask,
                session_id=session_id,
                image_ref=f"{body.image_id}#z{body.slice}",
            )
        except LimisError as exc:
            return _error_response(exc)
        with registry_lock:
            sessions[session_id] = session
            locks[session_id] = threading.Lock()
        _persist(session)
        state = session.steps[0].state
        return {
            "session_id": session_id,
            "step": 0,
            "mask_rle": rle_encode(state.mask),
            "box": list(state.box.as_tuple()),
            "tau": state.tau,
            "window": {"center": state.window.center, "width": state.window.width},
            "detections": [
                {"box": list(d.box.as_tuple()), "label": d.label, "score": d.score}
                for d in session.detections
            ],
        }

    @app.post("/v1/sessions/{session_id}/command")
    def post_command(session_id: str, body: CommandBody):
        session = _session(session_id)
        try:
            cmd = cm.parse(body.text)
        except ParseError as exc:
            return _error_response(exc)
        with locks[session_id]:
            try:
                outcome = session.apply_command(cmd)
            except LimisError as exc:
                return _error_response(exc)
            _persist(session)
            return _step_doc(session, outcome)

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return _session(session_id).export()

    @app.get("/v1/sessions/{session_id}/steps/{step_id}/mask.png")
    def get_mask_png(session_id: str, step_id: int):
        session = _session(session_id)
        step = session.step_by_id(step_id)
        return Response(content=mask_to_png(step.state.mask), media_type="image/png")

    @app.post("/v1/sessions/{session_id}/accept")
    def post_accept(session_id: str):
        session = _session(session_id)
        with locks[session_id]:
            step = session.accept()
            _persist(session)
            return {"cursor": session.cursor, "accepted_step": step.id}

    @app.post("/v1/sessions/{session_id}/revert")
    def post_revert(session_id: str, body: RevertBody):
        session = _session(session_id)
        with locks[session_id]:
            step = session.revert_to(body.to)
            _persist(session)
            return {"cursor": session.cursor,
                    "mask_rle": rle_encode(step.state.mask)}

    @app.post("/v1/sessions/{session_id}/final")
    def post_final(session_id: str, body: FinalBody):
        session = _session(session_id)
        with locks[session_id]:
            session.select_final(body.step)
            _persist(session)
            return {"final": session.final}

    @app.get("/v1/sessions/{session_id}/trajectory")
    def get_trajectory(session_id: str):
        session = _session(session_id)
        return dice_trajectory(session.export())

    @app.get("/v1/images/{image_id}/slices/{z}.png")
    def get_slice_png(image_id: str, z: int, center: float = 50.0, width: float = 400.0):
        if image_id not in images:
            return JSONResponse(status_code=404,
                                content={"error": f"unknown image '{image_id}'"})
        entry = images[image_id]
        nx, ny, nz = entry.volume.dims
        if not 0 <= z < nz:
            return JSONResponse(status_code=404,
                                content={"error": f"slice {z} outside [0, {nz})"})
        image = slice_transversal(entry.volume, z)
        grid = window_normalize(image, WindowSpec(center=center, width=width))
        from PIL import Image
        import io

        img = Image.fromarray((grid * 255.0).astype(np.uint8), mode="L")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.get("/v1/help")
    def get_help():
        return PlainTextResponse(cm.help_text(), media_type="text/markdown")

    if config.ui_dir and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

        @app.get("/")
        def index():
            return RedirectResponse(url="/ui/")

    return app
