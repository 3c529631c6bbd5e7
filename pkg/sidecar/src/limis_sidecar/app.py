"""Wire-protocol inference server.

Stub mode (the default) needs no model weights: /detect proposes the
bounding box of above-mean pixels per requested label and /segment fills
the prompt box with probability 1.0, so an engine thresholding the answer
gets exactly the box rectangle. Real models can be wired in by passing a
ModelPair; until one is loaded the server answers 503.

Protocol reference: the limis package's docs/wire-protocol.md. The limis
conformance suite passes against stub mode unmodified.
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel


class ClickBody(BaseModel):
    x: int
    y: int
    positive: bool


class DetectBody(BaseModel):
    width: int
    height: int
    pixels_b64: str
    labels: list[str]


class SegmentBody(BaseModel):
    width: int
    height: int
    pixels_b64: str
    box: list[int]
    clicks: list[ClickBody] = []


class ModelPair(Protocol):
    """Real models plug in here: both take/return numpy grids."""

    name: str

    def detect(self, pixels: np.ndarray, labels: list[str]) -> list[dict]: ...

    def segment(self, pixels: np.ndarray, box: tuple[int, int, int, int],
                clicks: list[tuple[int, int, bool]]) -> np.ndarray: ...


@dataclass
class StubModels:
    """Classical stand-in: mean-threshold boxes and box-fill masks."""

    name: str = "stub-boxfill"

    def detect(self, pixels: np.ndarray, labels: list[str]) -> list[dict]:
        above = pixels > pixels.mean()
        if not above.any():
            return []
        ys, xs = np.nonzero(above)
        box = [int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1]
        return [{"box": box, "label": label, "score": 0.5} for label in labels]

    def segment(self, pixels: np.ndarray, box, clicks) -> np.ndarray:
        x0, y0, x1, y1 = box
        prob = np.zeros(pixels.shape, dtype=np.float32)
        prob[y0:y1, x0:x1] = 1.0
        return prob


def _decode_pixels(b64: str, width: int, height: int) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ValueError(f"pixels_b64 is not valid base64: {exc}") from exc
    if len(raw) != width * height * 4:
        raise ValueError(
            f"pixel payload is {len(raw)} bytes, expected {width * height * 4}")
    return np.frombuffer(raw, dtype="<f4").reshape(height, width)


def create_app(models: ModelPair | None = None, *, stub: bool = True) -> FastAPI:
    """Build the server; stub=True loads the classical stand-in immediately,
    stub=False starts unloaded (503 everywhere) until models are provided."""
    app = FastAPI(title="limis-sidecar", docs_url=None, redoc_url=None)
    state = {"models": models if models is not None else (StubModels() if stub else None)}

    def _unavailable():
        return JSONResponse(status_code=503,
                            content={"error": "model not loaded"})

    @app.get("/health")
    def health():
        if state["models"] is None:
            return _unavailable()
        return {"status": "ok", "model": state["models"].name}

    @app.post("/detect")
    def detect(body: DetectBody):
        if state["models"] is None:
            return _unavailable()
        try:
            pixels = _decode_pixels(body.pixels_b64, body.width, body.height)
        except ValueError as exc:
            return JSONResponse(status_code=422, content={"error": str(exc)})
        detections = state["models"].detect(pixels, body.labels)
        w, h = body.width, body.height
        cleaned = []
        for d in detections:
            x0, y0, x1, y1 = d["box"]
            cleaned.append({
                "box": [max(0, int(x0)), max(0, int(y0)), min(w, int(x1)), min(h, int(y1))],
                "label": str(d["label"]),
                "score": float(min(max(d["score"], 0.0), 1.0)),
            })
        cleaned.sort(key=lambda d: -d["score"])
        return {"detections": cleaned}

    @app.post("/segment")
    def segment(body: SegmentBody):
        if state["models"] is None:
            return _unavailable()
        try:
            pixels = _decode_pixels(body.pixels_b64, body.width, body.height)
        except ValueError as exc:
            return JSONResponse(status_code=422, content={"error": str(exc)})
        if len(body.box) != 4:
            return JSONResponse(status_code=422, content={"error": "box must be [x0,y0,x1,y1]"})
        x0, y0, x1, y1 = (int(v) for v in body.box)
        if not (0 <= x0 < x1 <= body.width and 0 <= y0 < y1 <= body.height):
            return JSONResponse(status_code=422, content={"error": "box outside the image"})
        clicks = [(c.x, c.y, c.positive) for c in body.clicks]
        prob = state["models"].segment(pixels, (x0, y0, x1, y1), clicks)
        prob = np.clip(np.asarray(prob, dtype="<f4"), 0.0, 1.0)
        return {"prob_b64": base64.b64encode(prob.tobytes()).decode("ascii")}

    return app
