"""Binary/probabilistic mask algebra: thresholding, connected components,
majority ensembles, Dice, and the RLE/PNG serialization formats.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .core import BBox, BinMask, ProbMask
from .errors import DimensionMismatch, UnknownComponent

# 4-connectivity: diagonal neighbors do not join components.
_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def threshold(p: ProbMask, tau: float) -> BinMask:
    """Pixel set iff p >= tau. Antitone in tau."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    return BinMask(p.data >= np.float32(tau))


@dataclass(frozen=True)
class Component:
    """One connected component: 1-based id, pixel count, tight bbox."""

    id: int
    area: int
    bbox: BBox


@dataclass(frozen=True)
class ComponentSet:
    """Component labeling of a mask.

    labels holds 0 for background and the component id elsewhere. Ids are
    assigned in decreasing area, ties broken by the smallest row-major
    index of the component's top-left-most pixel.
    """

    labels: np.ndarray
    components: tuple[Component, ...]

    def __len__(self) -> int:
        return len(self.components)

    def mask_of(self, component_id: int) -> BinMask:
        if not any(c.id == component_id for c in self.components):
            raise UnknownComponent(f"no component with id {component_id}")
        return BinMask(self.labels == component_id)


def connected_components(m: BinMask) -> ComponentSet:
    """Label 4-connected components, largest first."""
    raw, n = ndimage.label(m.data, structure=_STRUCTURE_4)
    if n == 0:
        return ComponentSet(np.zeros_like(raw), ())
    areas = ndimage.sum_labels(np.ones_like(raw), raw, index=np.arange(1, n + 1))
    flat_first = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    ys, xs = np.nonzero(raw)
    flat = ys * m.width + xs
    for f, lab in zip(flat, raw[ys, xs]):
        if f < flat_first[lab - 1]:
            flat_first[lab - 1] = f
    order = sorted(range(n), key=lambda i: (-int(areas[i]), int(flat_first[i])))
    remap = np.zeros(n + 1, dtype=raw.dtype)
    comps = []
    for new_id, old in enumerate(order, start=1):
        remap[old + 1] = new_id
        member = raw == old + 1
        cy, cx = np.nonzero(member)
        comps.append(Component(
            id=new_id,
            area=int(areas[old]),
            bbox=BBox(int(cx.min()), int(cy.min()), int(cx.max()) + 1, int(cy.max()) + 1),
        ))
    return ComponentSet(remap[raw], tuple(comps))


def remove_component(m: BinMask, component_id: int) -> BinMask:
    """Clear every pixel of the identified component; others untouched."""
    comps = connected_components(m)
    if not any(c.id == component_id for c in comps.components):
        raise UnknownComponent(f"no component with id {component_id}")
    return BinMask(m.data & (comps.labels != component_id))


def majority_ensemble(masks: list[BinMask] | tuple[BinMask, ...]) -> BinMask:
    """Pixel set iff set in strictly more than half of the inputs."""
    if len(masks) < 2:
        raise ValueError("majority ensemble needs at least 2 masks")
    shape = masks[0].data.shape
    for m in masks[1:]:
        if m.data.shape != shape:
            raise DimensionMismatch("ensemble masks must share dimensions")
    votes = np.zeros(shape, dtype=np.int32)
    for m in masks:
        votes += m.data
    return BinMask(votes * 2 > len(masks))


def dice(a: BinMask, b: BinMask) -> float:
    """2|A∩B| / (|A|+|B|); 1.0 when both masks are empty."""
    if a.data.shape != b.data.shape:
        raise DimensionMismatch("dice requires equal mask dimensions")
    total = int(a.data.sum()) + int(b.data.sum())
    if total == 0:
        return 1.0
    inter = int((a.data & b.data).sum())
    return 2.0 * inter / total


def rle_encode(m: BinMask) -> dict:
    """Row-major run-length encoding, runs alternate starting with background."""
    flat = m.data.reshape(-1)
    changes = np.nonzero(np.diff(flat))[0] + 1
    boundaries = np.concatenate(([0], changes, [flat.size]))
    runs = [int(end - start) for start, end in zip(boundaries[:-1], boundaries[1:])]
    if flat[0]:
        runs.insert(0, 0)
    return {"width": m.width, "height": m.height, "rle": runs}


def rle_decode(doc: dict) -> BinMask:
    width, height, runs = int(doc["width"]), int(doc["height"]), doc["rle"]
    total = sum(int(r) for r in runs)
    if total != width * height:
        raise ValueError("run lengths do not cover the mask")
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    val = False
    for r in runs:
        r = int(r)
        if val:
            flat[pos:pos + r] = True
        pos += r
        val = not val
    return BinMask(flat.reshape(height, width))


def mask_to_png(m: BinMask) -> bytes:
    """8-bit grayscale PNG, foreground 255, background 0."""
    img = Image.fromarray((m.data.astype(np.uint8)) * 255, mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def png_to_mask(data: bytes) -> BinMask:
    img = Image.open(io.BytesIO(data)).convert("L")
    arr = np.asarray(img)
    return BinMask(arr >= 128)
