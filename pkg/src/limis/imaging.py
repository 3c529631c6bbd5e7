"""Intensity and geometry transforms: percentile clipping, foreground
z-scoring, CT windowing, crop-with-margin, resampling, and training
augmentations. All functions are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .core import BBox, BinMask, HuImage, WindowSpec, clamp_box, expand_box
from .errors import EmptyBox, EmptyForeground, UnknownPreset

ZSCORE_EPS = 1e-6

# Common resampling target used when pooling heterogeneous sources;
# overridable everywhere it is consumed.
COMMON_SPACING_MM = (1.5, 1.5)
COMMON_SIZE_PX = (512, 512)


def percentile_clip(img: HuImage, lo_pct: float = 0.5, hi_pct: float = 99.5) -> HuImage:
    """Clip intensities to the empirical [lo_pct, hi_pct] percentiles
    (linear interpolation between closest ranks). Idempotent."""
    lo, hi = np.percentile(img.data, [lo_pct, hi_pct])
    return HuImage(np.clip(img.data, lo, hi), spacing_mm=img.spacing_mm)


def zscore_foreground(img: HuImage, fg: BinMask) -> np.ndarray:
    """(x - mean_fg) / std_fg over the whole image; std guarded by epsilon."""
    if fg.data.shape != img.data.shape:
        raise ValueError("foreground mask must match image dimensions")
    if fg.area == 0:
        raise EmptyForeground("foreground mask is empty")
    vals = img.data[fg.data]
    mean = float(vals.mean())
    std = float(vals.std())
    return ((img.data - mean) / max(std, ZSCORE_EPS)).astype(np.float32)


def window_normalize(img: HuImage | np.ndarray, window: WindowSpec) -> np.ndarray:
    """Map HU onto [0, 1] through the display window, clamping outside it.

    Monotone non-decreasing in HU for a fixed window.
    """
    data = img.data if isinstance(img, HuImage) else np.asarray(img, dtype=np.float32)
    out = (data - np.float32(window.low)) / np.float32(window.width)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def denormalize_window(grid: np.ndarray, window: WindowSpec) -> np.ndarray:
    """Invert window_normalize (values outside the window stay clamped)."""
    return (np.asarray(grid, dtype=np.float32) * np.float32(window.width)
            + np.float32(window.low)).astype(np.float32)


def crop_with_margin(img: HuImage, box: BBox, margin_px: int) -> tuple[HuImage, tuple[int, int]]:
    """Crop to the box expanded by margin_px per side (clamped to the image).

    Returns the crop and its (x, y) origin so masks paste back exactly.
    """
    if margin_px < 0:
        raise ValueError("margin must be >= 0")
    region = clamp_box(expand_box(box, margin_px), img.width, img.height)
    crop = img.data[region.y0:region.y1, region.x0:region.x1].copy()
    return HuImage(crop, spacing_mm=img.spacing_mm), (region.x0, region.y0)


def paste_mask(crop_mask: BinMask, offset: tuple[int, int], width: int, height: int) -> BinMask:
    """Place a crop-coordinate mask back onto the full image canvas."""
    ox, oy = offset
    out = np.zeros((height, width), dtype=bool)
    out[oy:oy + crop_mask.height, ox:ox + crop_mask.width] = crop_mask.data
    return BinMask(out)


def _sample_bilinear(data: np.ndarray, xs: np.ndarray, ys: np.ndarray, fill: float) -> np.ndarray:
    """Bilinear gather at continuous coordinates; out-of-bounds -> fill."""
    h, w = data.shape
    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    cx = np.clip(xs, 0, w - 1)
    cy = np.clip(ys, 0, h - 1)
    x0 = np.floor(cx).astype(np.int64)
    y0 = np.floor(cy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (cx - x0).astype(np.float32)
    fy = (cy - y0).astype(np.float32)
    top = data[y0, x0] * (1 - fx) + data[y0, x1] * fx
    bot = data[y1, x0] * (1 - fx) + data[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    return np.where(valid, out, np.float32(fill)).astype(np.float32)


def _sample_nearest(data: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    h, w = data.shape
    valid = (xs >= -0.5) & (xs < w - 0.5) & (ys >= -0.5) & (ys < h - 0.5)
    ix = np.clip(np.rint(xs).astype(np.int64), 0, w - 1)
    iy = np.clip(np.rint(ys).astype(np.int64), 0, h - 1)
    return np.where(valid, data[iy, ix], False)


def resample(img: HuImage, target_spacing_mm: tuple[float, float],
             target_size_px: tuple[int, int]) -> HuImage:
    """Bilinear resample to the target spacing, then center-pad (with the
    image minimum) or center-crop to the target size.

    The interpolation maps output sample i to input position
    i * (n_in - 1) / (n_out - 1), so corner pixels are preserved.
    """
    tr, tc = target_spacing_mm
    tw, th = target_size_px
    if tr <= 0 or tc <= 0 or tw <= 0 or th <= 0:
        raise ValueError("target spacing and size must be positive")
    sr, sc = img.spacing_mm
    out_w = max(1, round(img.width * sc / tc))
    out_h = max(1, round(img.height * sr / tr))
    xs = (np.linspace(0, img.width - 1, out_w) if out_w > 1
          else np.zeros(1))
    ys = (np.linspace(0, img.height - 1, out_h) if out_h > 1
          else np.zeros(1))
    gx, gy = np.meshgrid(xs, ys)
    fill = float(img.data.min())
    scaled = _sample_bilinear(img.data, gx, gy, fill)

    canvas = np.full((th, tw), np.float32(fill), dtype=np.float32)
    src_x0 = max(0, (out_w - tw) // 2)
    src_y0 = max(0, (out_h - th) // 2)
    dst_x0 = max(0, (tw - out_w) // 2)
    dst_y0 = max(0, (th - out_h) // 2)
    cw = min(out_w, tw)
    ch = min(out_h, th)
    canvas[dst_y0:dst_y0 + ch, dst_x0:dst_x0 + cw] = \
        scaled[src_y0:src_y0 + ch, src_x0:src_x0 + cw]
    return HuImage(canvas, spacing_mm=(tr, tc))


@dataclass(frozen=True)
class AugmentSpec:
    """Training augmentation parameters: each transform fires independently."""

    p_translate: float = 0.10
    p_rotate: float = 0.10
    p_scale: float = 0.10
    rotate_deg_range: tuple[float, float] = (-10.3, 10.3)
    translate_px_max: int = 10
    scale_range: tuple[float, float] = (0.9, 1.1)
    seed: int = 0

    def __post_init__(self):
        for p in (self.p_translate, self.p_rotate, self.p_scale):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")


def _affine_params(spec: AugmentSpec) -> tuple[tuple[int, int], float, float]:
    """Draw (translation, angle_deg, scale); draw order is fixed:
    translate block, rotate block, scale block."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(spec.seed)))
    dx = dy = 0
    if rng.random() < spec.p_translate:
        dx = int(rng.integers(-spec.translate_px_max, spec.translate_px_max + 1))
        dy = int(rng.integers(-spec.translate_px_max, spec.translate_px_max + 1))
    angle = 0.0
    if rng.random() < spec.p_rotate:
        angle = float(rng.uniform(*spec.rotate_deg_range))
    scale = 1.0
    if rng.random() < spec.p_scale:
        scale = float(rng.uniform(*spec.scale_range))
    return (dx, dy), angle, scale


def _forward_point(x: float, y: float, translation, angle_deg, scale, center) -> tuple[float, float]:
    cx, cy = center
    x, y = x + translation[0], y + translation[1]
    if angle_deg:
        rad = np.deg2rad(angle_deg)
        c, s = np.cos(rad), np.sin(rad)
        x, y = cx + c * (x - cx) - s * (y - cy), cy + s * (x - cx) + c * (y - cy)
    if scale != 1.0:
        x, y = cx + scale * (x - cx), cy + scale * (y - cy)
    return x, y


def augment(img: HuImage, boxes: list[BBox], spec: AugmentSpec,
            masks: tuple[BinMask, ...] = ()) -> tuple[HuImage, list[BBox], tuple[BinMask, ...]]:
    """Apply translate/rotate/scale, each with its own probability.

    Content moves forward (translation first, then rotation and scaling
    about the image center). Boxes become the clamped axis-aligned hull of
    their transformed corners; masks (optional) are resampled with nearest
    neighbor. Deterministic for a fixed spec.seed.
    """
    translation, angle, scale = _affine_params(spec)
    if translation == (0, 0) and angle == 0.0 and scale == 1.0:
        return img, list(boxes), masks

    h, w = img.data.shape
    center = ((w - 1) / 2.0, (h - 1) / 2.0)

    # inverse map: output pixel -> input position (undo scale, rotation, shift)
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    ix, iy = gx, gy
    if scale != 1.0:
        ix = center[0] + (ix - center[0]) / scale
        iy = center[1] + (iy - center[1]) / scale
    if angle:
        rad = np.deg2rad(-angle)
        c, s = np.cos(rad), np.sin(rad)
        rx = center[0] + c * (ix - center[0]) - s * (iy - center[1])
        ry = center[1] + s * (ix - center[0]) + c * (iy - center[1])
        ix, iy = rx, ry
    ix = ix - translation[0]
    iy = iy - translation[1]

    fill = float(img.data.min())
    out_img = HuImage(_sample_bilinear(img.data, ix, iy, fill), spacing_mm=img.spacing_mm)

    out_boxes = []
    for b in boxes:
        corners = [(b.x0, b.y0), (b.x1 - 1, b.y0), (b.x0, b.y1 - 1), (b.x1 - 1, b.y1 - 1)]
        pts = [_forward_point(x, y, translation, angle, scale, center) for x, y in corners]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        hull = BBox(int(np.floor(min(xs))), int(np.floor(min(ys))),
                    int(np.ceil(max(xs))) + 1, int(np.ceil(max(ys))) + 1)
        out_boxes.append(clamp_box(hull, w, h))

    out_masks = tuple(
        BinMask(_sample_nearest(m.data, ix, iy)) for m in masks
    )
    return out_img, out_boxes, out_masks


@dataclass(frozen=True)
class WindowPresets:
    """Named display windows plus the organ-to-preset assignment."""

    presets: dict[str, WindowSpec]
    organ_map: dict[str, str]
    default_name: str
    low_hu_name: str

    def __post_init__(self):
        from .core import ORGAN_LABELS
        missing = [lab for lab in ORGAN_LABELS if lab not in self.organ_map]
        if missing:
            raise UnknownPreset(f"organ_map lacks presets for: {missing}")
        for name in list(self.organ_map.values()) + [self.default_name, self.low_hu_name]:
            if name not in self.presets:
                raise UnknownPreset(f"preset '{name}' not defined")

    def get(self, name: str) -> WindowSpec:
        key = name.strip().lower()
        if key not in self.presets:
            raise UnknownPreset(f"unknown window preset '{name}'")
        return self.presets[key]

    def for_organ(self, label: str) -> WindowSpec:
        if label not in self.organ_map:
            raise UnknownPreset(f"no preset mapped for organ '{label}'")
        return self.presets[self.organ_map[label]]

    def organ_preset_name(self, label: str) -> str:
        return self.organ_map[label]

    @property
    def default(self) -> WindowSpec:
        return self.presets[self.default_name]

    @property
    def low_hu(self) -> WindowSpec:
        return self.presets[self.low_hu_name]


def load_window_presets(path: str | None = None) -> WindowPresets:
    """Load the preset table; without a path, the packaged table is used."""
    if path is None:
        text = resources.files("limis").joinpath("data/window_presets.json").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    doc = json.loads(text)
    presets = {
        name.lower(): WindowSpec(center=float(w["center"]), width=float(w["width"]))
        for name, w in doc["presets"].items()
    }
    return WindowPresets(
        presets=presets,
        organ_map={k: v.lower() for k, v in doc["organ_map"].items()},
        default_name=doc["default"].lower(),
        low_hu_name=doc.get("low_hu", doc["default"]).lower(),
    )


DEFAULT_PRESETS = load_window_presets()
