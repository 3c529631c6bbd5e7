"""Detector and promptable-segmenter backends.

Two implementations of the same contract: a deterministic synthetic
backend (pure functions of the pixels and scene-independent parameters,
suitable for offline tests) and a client for a remote inference server
speaking the HTTP wire protocol documented in docs/wire-protocol.md.

Contract notes:
- detect() receives the raw HU grid; a backend owns its normalization.
- segment() receives a window-normalized crop plus the window that
  produced it; the prompt box is in crop coordinates.
- A positive click at q guarantees p(q) >= 0.5 + margin, a negative click
  p(q) <= 0.5 - margin. The synthetic backend enforces this by clamping,
  the remote client by post-processing the returned probabilities.
"""

from __future__ import annotations

import base64 as _b64
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import BBox, Click, ProbMask, WindowSpec
from .errors import BackendUnavailable
from .imaging import denormalize_window

CLICK_MARGIN = 0.01

# Canonical per-organ HU the synthetic detector assumes; scene-independent
# parameters, spaced so the +/-2 sigma bands never overlap.
ORGAN_HU: dict[str, float] = {
    "bladder": 15.0,
    "gallbladder": 30.0,
    "colon": 45.0,
    "liver": 60.0,
    "pancreas": 75.0,
    "stomach": 90.0,
    "duodenum": 105.0,
    "esophagus": 120.0,
    "kidney left": 135.0,
    "kidney right": 150.0,
    "spleen": 165.0,
}


@dataclass(frozen=True)
class Detection:
    """Scored labeled box on the queried image."""

    box: BBox
    label: str
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("detection score must lie in [0, 1]")


@dataclass(frozen=True)
class SegmentPrompt:
    """Window-normalized crop plus spatial prompts, all in crop coordinates."""

    pixels: np.ndarray  # (h, w) float32 in [0, 1]
    box: BBox
    clicks: tuple[Click, ...]
    window: WindowSpec

    def __post_init__(self):
        h, w = self.pixels.shape
        if not (0 <= self.box.x0 < self.box.x1 <= w and 0 <= self.box.y0 < self.box.y1 <= h):
            raise ValueError("prompt box must lie inside the crop")
        for c in self.clicks:
            if not (0 <= c.x < w and 0 <= c.y < h):
                raise ValueError("prompt clicks must lie inside the crop")


def encode_grid(grid: np.ndarray) -> str:
    """Base64 of little-endian float32, row-major."""
    return _b64.b64encode(np.ascontiguousarray(grid, dtype="<f4").tobytes()).decode("ascii")


def decode_grid(data: str, width: int, height: int) -> np.ndarray:
    raw = _b64.b64decode(data, validate=True)
    if len(raw) != width * height * 4:
        raise ValueError(f"expected {width * height * 4} bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype="<f4").reshape(height, width).astype(np.float32)


def apply_click_contract(prob: np.ndarray, clicks: tuple[Click, ...],
                         margin: float = CLICK_MARGIN) -> np.ndarray:
    """Clamp probabilities so every click lands on its chosen side of 0.5."""
    out = prob.copy()
    for c in clicks:
        if c.positive:
            out[c.y, c.x] = max(out[c.y, c.x], np.float32(0.5 + margin))
        else:
            out[c.y, c.x] = min(out[c.y, c.x], np.float32(0.5 - margin))
    return np.clip(out, 0.0, 1.0).astype(np.float32)


@dataclass(frozen=True)
class SyntheticBackend:
    """Deterministic classical stand-in for the neural detector/segmenter.

    detect: for each requested label, pixels within the label's canonical
    HU band (ORGAN_HU +/- 2*band_sigma) are grouped into 4-connected
    components; each large-enough component yields a detection whose score
    is the mean Gaussian band membership of its pixels.

    segment: seeded region growing. Seeds are the positive clicks, or the
    box center when there are none; negative clicks reject seeds and act
    as barriers. A pixel is admissible when its Gaussian membership around
    the seed-mean HU (tolerance tol_hu) reaches 0.5; the region is the
    union of admissible components containing a seed, restricted to the
    prompt box. Output probability is the membership inside the region,
    0 outside, 1 at seeds.
    """

    organ_hu: dict[str, float] = field(default_factory=lambda: dict(ORGAN_HU))
    band_sigma: float = 6.0
    tol_hu: float = 40.0
    min_area: int = 8
    click_margin: float = CLICK_MARGIN

    _STRUCTURE = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

    def detect(self, image_hu: np.ndarray, labels: list[str]) -> list[Detection]:
        img = np.asarray(image_hu, dtype=np.float32)
        h, w = img.shape
        found: list[Detection] = []
        for label in labels:
            if label not in self.organ_hu:
                continue
            mu = self.organ_hu[label]
            band = 2.0 * self.band_sigma
            in_band = (img >= mu - band) & (img <= mu + band)
            labeled, n = ndimage.label(in_band, structure=self._STRUCTURE)
            for comp_id in range(1, n + 1):
                member = labeled == comp_id
                area = int(member.sum())
                if area < self.min_area:
                    continue
                ys, xs = np.nonzero(member)
                box = BBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
                vals = img[member].astype(np.float64)
                score = float(np.exp(-((vals - mu) ** 2) / (2.0 * self.band_sigma ** 2)).mean())
                found.append(Detection(box=box, label=label,
                                       score=min(max(score, 0.0), 1.0)))
        found.sort(key=lambda d: (-d.score, d.label, d.box.y0, d.box.x0, d.box.y1, d.box.x1))
        return found

    def segment(self, prompt: SegmentPrompt) -> ProbMask:
        hu = denormalize_window(prompt.pixels, prompt.window).astype(np.float64)
        h, w = hu.shape
        box = prompt.box
        negatives = {(c.x, c.y) for c in prompt.clicks if not c.positive}
        seeds = [(c.x, c.y) for c in prompt.clicks if c.positive]
        if not seeds:
            seeds = [box.center()]
        seeds = [s for s in seeds if s not in negatives]

        prob = np.zeros((h, w), dtype=np.float32)
        if seeds:
            seed_mean = float(np.mean([hu[y, x] for x, y in seeds]))
            membership = np.exp(-((hu - seed_mean) ** 2) / (2.0 * self.tol_hu ** 2))
            in_box = np.zeros((h, w), dtype=bool)
            in_box[box.y0:box.y1, box.x0:box.x1] = True
            admissible = (membership >= 0.5) & in_box
            for x, y in negatives:
                admissible[y, x] = False
            for x, y in seeds:
                if in_box[y, x]:
                    admissible[y, x] = True
            labeled, _ = ndimage.label(admissible, structure=self._STRUCTURE)
            seed_ids = {labeled[y, x] for x, y in seeds if labeled[y, x] > 0}
            if seed_ids:
                region = np.isin(labeled, sorted(seed_ids))
                prob = np.where(region, membership, 0.0).astype(np.float32)
            for x, y in seeds:
                if in_box[y, x]:
                    prob[y, x] = 1.0
        prob = apply_click_contract(prob, prompt.clicks, self.click_margin)
        return ProbMask(prob)


class RemoteBackend:
    """Client for an inference server speaking the JSON wire protocol.

    Thread-safe; a semaphore caps in-flight requests (default 4). Any
    transport failure, timeout or non-200 answer raises BackendUnavailable.
    """

    def __init__(self, base_url: str, timeout_s: float = 30.0, max_inflight: int = 4,
                 click_margin: float = CLICK_MARGIN):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self.click_margin = click_margin
        self._gate = threading.Semaphore(max_inflight)
        self._client = httpx.Client(timeout=timeout_s)

    def _post(self, path: str, payload: dict) -> dict:
        import httpx

        with self._gate:
            try:
                resp = self._client.post(self.base_url + path, json=payload)
            except httpx.HTTPError as exc:
                raise BackendUnavailable(f"POST {path}: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnavailable(f"POST {path} answered {resp.status_code}")
        try:
            return resp.json()
        except ValueError as exc:
            raise BackendUnavailable(f"POST {path}: invalid JSON body") from exc

    def health(self) -> dict:
        import httpx

        try:
            resp = self._client.get(self.base_url + "/health")
        except httpx.HTTPError as exc:
            raise BackendUnavailable(str(exc)) from exc
        if resp.status_code != 200:
            raise BackendUnavailable(f"GET /health answered {resp.status_code}")
        return resp.json()

    def detect(self, image_hu: np.ndarray, labels: list[str]) -> list[Detection]:
        img = np.asarray(image_hu, dtype=np.float32)
        h, w = img.shape
        doc = self._post("/detect", {
            "width": w,
            "height": h,
            "pixels_b64": encode_grid(img),
            "labels": list(labels),
        })
        try:
            out = []
            for d in doc["detections"]:
                x0, y0, x1, y1 = (int(v) for v in d["box"])
                box = BBox(max(0, x0), max(0, y0), min(w, x1), min(h, y1))
                out.append(Detection(box=box, label=str(d["label"]),
                                     score=min(max(float(d["score"]), 0.0), 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendUnavailable(f"malformed /detect response: {exc}") from exc
        out.sort(key=lambda d: (-d.score, d.label, d.box.y0, d.box.x0))
        return out

    def segment(self, prompt: SegmentPrompt) -> ProbMask:
        h, w = prompt.pixels.shape
        doc = self._post("/segment", {
            "width": w,
            "height": h,
            "pixels_b64": encode_grid(prompt.pixels),
            "box": list(prompt.box.as_tuple()),
            "clicks": [{"x": c.x, "y": c.y, "positive": c.positive} for c in prompt.clicks],
        })
        try:
            prob = decode_grid(doc["prob_b64"], w, h)
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendUnavailable(f"malformed /segment response: {exc}") from exc
        prob = np.clip(prob, 0.0, 1.0)
        prob = apply_click_contract(prob, prompt.clicks, self.click_margin)
        return ProbMask(prob)

    def close(self):
        self._client.close()
