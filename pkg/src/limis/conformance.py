"""Wire-protocol conformance suite for inference servers.

Runs a fixed battery of checks against anything that can answer the
/health, /detect and /segment endpoints (a live URL or an in-process test
client). Raises ConformanceFailure with the full failure list when any
check fails; used both by this package's own remote-backend tests and by
external server implementations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .backends import decode_grid, encode_grid
from .errors import LimisError


class ConformanceFailure(LimisError, AssertionError):
    def __init__(self, failures: list[str]):
        super().__init__("wire-protocol conformance failed:\n- " + "\n- ".join(failures))
        self.failures = failures


class WireTransport(Protocol):
    """Minimal HTTP surface the suite drives."""

    def get(self, path: str) -> tuple[int, dict | None]: ...

    def post_json(self, path: str, payload: dict) -> tuple[int, dict | None]: ...


@dataclass
class HttpTransport:
    """Adapter for a live server; also fits fastapi/starlette test clients
    via the `client` duck type (get/post returning .status_code/.json())."""

    base_url: str = ""
    client: object | None = None
    timeout_s: float = 30.0

    def get(self, path: str):
        return self._request("get", path)

    def post_json(self, path: str, payload: dict):
        return self._request("post", path, payload)

    def _request(self, method: str, path: str, payload: dict | None = None):
        if self.client is not None:
            fn = getattr(self.client, method)
            resp = fn(path, json=payload) if payload is not None else fn(path)
        else:
            import httpx

            with httpx.Client(timeout=self.timeout_s) as client:
                fn = getattr(client, method)
                url = self.base_url + path
                resp = fn(url, json=payload) if payload is not None else fn(url)
        try:
            body = resp.json()
        except Exception:
            body = None
        return resp.status_code, body


def _test_image() -> np.ndarray:
    img = np.full((24, 32), -1000.0, dtype=np.float32)
    img[6:18, 8:24] = 60.0
    return img


def run_conformance(transport: WireTransport, *, check_determinism: bool = True) -> None:
    """Run every protocol check; raise ConformanceFailure on any failure."""
    failures: list[str] = []

    def check(cond: bool, message: str):
        if not cond:
            failures.append(message)

    # health
    status, body = transport.get("/health")
    check(status == 200, f"/health answered {status}")
    if body is not None:
        check(body.get("status") == "ok", f"/health status field: {body.get('status')!r}")
        check(isinstance(body.get("model"), str) and body.get("model"),
              "/health must name the model")
    else:
        check(False, "/health body is not JSON")

    img = _test_image()
    h, w = img.shape
    detect_payload = {"width": w, "height": h,
                      "pixels_b64": encode_grid(img), "labels": ["liver", "spleen"]}

    # detect shape
    status, body = transport.post_json("/detect", detect_payload)
    check(status == 200, f"/detect answered {status}")
    detections = (body or {}).get("detections")
    check(isinstance(detections, list), "/detect must return a detections list")
    for d in detections or []:
        box = d.get("box")
        check(isinstance(box, list) and len(box) == 4, f"detection box malformed: {box!r}")
        if isinstance(box, list) and len(box) == 4:
            x0, y0, x1, y1 = box
            check(0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h,
                  f"detection box out of bounds: {box}")
        check(d.get("label") in detect_payload["labels"],
              f"detection label {d.get('label')!r} was not requested")
        score = d.get("score")
        check(isinstance(score, (int, float)) and 0.0 <= score <= 1.0,
              f"detection score out of range: {score!r}")

    # segment shape
    segment_payload = {
        "width": w, "height": h, "pixels_b64": encode_grid((img + 1000.0) / 2000.0),
        "box": [8, 6, 24, 18],
        "clicks": [{"x": 10, "y": 8, "positive": True}],
    }
    status, body = transport.post_json("/segment", segment_payload)
    check(status == 200, f"/segment answered {status}")
    prob_b64 = (body or {}).get("prob_b64")
    check(isinstance(prob_b64, str), "/segment must return prob_b64")
    if isinstance(prob_b64, str):
        try:
            prob = decode_grid(prob_b64, w, h)
            check(float(prob.min()) >= 0.0 and float(prob.max()) <= 1.0,
                  "probabilities must lie in [0, 1]")
        except ValueError as exc:
            check(False, f"prob_b64 does not decode to a {w}x{h} float32 grid: {exc}")

    if check_determinism and isinstance(prob_b64, str):
        status2, body2 = transport.post_json("/segment", segment_payload)
        check(status2 == 200 and (body2 or {}).get("prob_b64") == prob_b64,
              "identical /segment requests must return identical bytes")

    # malformed bodies are rejected, not 500'd
    status, _ = transport.post_json("/detect", {"width": 4, "height": 4, "labels": []})
    check(400 <= status < 500, f"/detect without pixels answered {status}")
    status, _ = transport.post_json("/segment", {
        "width": 4, "height": 4, "pixels_b64": "!!notbase64!!",
        "box": [0, 0, 2, 2], "clicks": [],
    })
    check(400 <= status < 500, f"/segment with invalid base64 answered {status}")
    status, _ = transport.post_json("/segment", {
        "width": 4, "height": 4, "pixels_b64": encode_grid(np.zeros((2, 2))),
        "box": [0, 0, 2, 2], "clicks": [],
    })
    check(400 <= status < 500, f"/segment with short pixel payload answered {status}")

    if failures:
        raise ConformanceFailure(failures)
