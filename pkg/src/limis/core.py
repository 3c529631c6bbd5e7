"""Shared domain types: CT slices, boxes, clicks, display windows, masks.

Conventions used everywhere: origin top-left, x = column, y = row,
boxes half-open ((x0, y0) inclusive, (x1, y1) exclusive), grids stored
as numpy arrays of shape (height, width) so data[y, x] is pixel (x, y).
All types are immutable values and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBox, UnknownLabel

ORGAN_LABELS: tuple[str, ...] = (
    "esophagus",
    "stomach",
    "duodenum",
    "colon",
    "gallbladder",
    "liver",
    "pancreas",
    "kidney left",
    "kidney right",
    "bladder",
    "spleen",
)


@dataclass(frozen=True)
class LabelVocabulary:
    """Ordered list of the 11 organ labels the pipeline understands."""

    labels: tuple[str, ...] = ORGAN_LABELS

    def __post_init__(self):
        if set(self.labels) != set(ORGAN_LABELS) or len(self.labels) != len(ORGAN_LABELS):
            raise UnknownLabel(f"vocabulary must be exactly the {len(ORGAN_LABELS)} organ labels")

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def __iter__(self):
        return iter(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def require(self, label: str) -> str:
        if label not in self.labels:
            raise UnknownLabel(f"unknown label '{label}'")
        return label

    def match_prefix(self, fragment: str) -> list[str]:
        """Labels that equal or start with the fragment (exact match wins alone)."""
        fragment = fragment.strip().lower()
        if fragment in self.labels:
            return [fragment]
        return [lab for lab in self.labels if lab.startswith(fragment)]


DEFAULT_VOCABULARY = LabelVocabulary()


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class HuImage:
    """2-D CT slice in Hounsfield units with in-plane pixel spacing."""

    data: np.ndarray  # (height, width) float32 HU
    spacing_mm: tuple[float, float] = (1.0, 1.0)  # (row, col) mm

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2 or data.size == 0:
            raise ValueError("HuImage data must be a nonempty 2-D grid")
        if not np.all(np.isfinite(data)):
            raise ValueError("HU values must be finite")
        if self.spacing_mm[0] <= 0 or self.spacing_mm[1] <= 0:
            raise ValueError("pixel spacing must be positive")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, HuImage)
            and self.spacing_mm == other.spacing_mm
            and np.array_equal(self.data, other.data)
        )


@dataclass(frozen=True, order=True)
class BBox:
    """Half-open pixel box: x in [x0, x1), y in [y0, y1).

    Coordinates may be negative before clamping; clamp_box guarantees
    the box lies within image bounds afterwards.
    """

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box {(self.x0, self.y0, self.x1, self.y1)}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    def center(self) -> tuple[int, int]:
        return ((self.x0 + self.x1) // 2, (self.y0 + self.y1) // 2)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class WindowSpec:
    """Linear HU display window: [center - width/2, center + width/2] -> [0, 1]."""

    center: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("window width must be positive")

    @property
    def low(self) -> float:
        return self.center - self.width / 2.0

    @property
    def high(self) -> float:
        return self.center + self.width / 2.0


@dataclass(frozen=True)
class Click:
    """Point prompt; positive marks foreground, negative background."""

    x: int
    y: int
    positive: bool


@dataclass(frozen=True, eq=False)
class ProbMask:
    """Per-pixel foreground probability grid in [0, 1]."""

    data: np.ndarray  # (height, width) float32

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2 or data.size == 0:
            raise ValueError("ProbMask data must be a nonempty 2-D grid")
        if float(data.min()) < 0.0 or float(data.max()) > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, ProbMask) and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class BinMask:
    """Binary foreground mask."""

    data: np.ndarray  # (height, width) bool

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=bool)
        if data.ndim != 2 or data.size == 0:
            raise ValueError("BinMask data must be a nonempty 2-D grid")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def area(self) -> int:
        return int(self.data.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, BinMask) and np.array_equal(self.data, other.data)

    @staticmethod
    def empty(width: int, height: int) -> "BinMask":
        return BinMask(np.zeros((height, width), dtype=bool))


def clamp_box(box: BBox, width: int, height: int) -> BBox:
    """Intersect a box with the image bounds [0,width) x [0,height).

    Raises EmptyBox when the intersection has no pixels. Idempotent.
    """
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    x0 = max(box.x0, 0)
    y0 = max(box.y0, 0)
    x1 = min(box.x1, width)
    y1 = min(box.y1, height)
    if x0 >= x1 or y0 >= y1:
        raise EmptyBox(f"box {box.as_tuple()} lies outside {width}x{height} image")
    return BBox(x0, y0, x1, y1)


def expand_box(box: BBox, left: int, top: int | None = None,
               right: int | None = None, bottom: int | None = None) -> BBox:
    """Grow (or shrink, with negative deltas) a box outward per edge.

    A single argument expands uniformly. The result is not clamped and
    raises EmptyBox if the edges collapse.
    """
    if top is None and right is None and bottom is None:
        top = right = bottom = left
    x0 = box.x0 - left
    y0 = box.y0 - (top if top is not None else 0)
    x1 = box.x1 + (right if right is not None else 0)
    y1 = box.y1 + (bottom if bottom is not None else 0)
    if x0 >= x1 or y0 >= y1:
        raise EmptyBox("box collapsed to zero size")
    return BBox(x0, y0, x1, y1)


def shift_box(box: BBox, dx: int, dy: int) -> BBox:
    return BBox(box.x0 + dx, box.y0 + dy, box.x1 + dx, box.y1 + dy)
