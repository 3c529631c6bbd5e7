"""CT volume I/O: a minimal single-file NIfTI-1 subset, synthetic phantom
volumes with analytic ground truth, and transversal slicing.

The NIfTI subset is deliberately narrow: uncompressed .nii, 348-byte header,
magic "n+1\\0", dim[0] == 3, datatype int16 or float32, endianness detected
via sizeof_hdr. Byte layout is documented in docs/nifti-subset.md.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import BBox, BinMask, DEFAULT_VOCABULARY
from .errors import (
    BadMagic,
    IndexOutOfRange,
    OverlapError,
    TruncatedFile,
    UnsupportedDatatype,
    UnsupportedDims,
)
from .core import HuImage

_HDR_SIZE = 348
_MAGIC_OFFSET = 344
_DT_INT16 = 4
_DT_FLOAT32 = 16


@dataclass(frozen=True, eq=False)
class Volume:
    """3-D voxel grid in HU, x fastest (data shape (nz, ny, nx))."""

    data: np.ndarray
    spacing_mm: tuple[float, float, float]  # (sx, sy, sz)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 3 or data.size == 0:
            raise ValueError("Volume data must be a nonempty 3-D grid")
        if any(s <= 0 for s in self.spacing_mm):
            raise ValueError("voxel spacing must be positive")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.data.shape
        return (nx, ny, nz)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Volume)
            and self.spacing_mm == other.spacing_mm
            and np.array_equal(self.data, other.data)
        )


def read_nifti(buf: bytes) -> Volume:
    """Parse an uncompressed single-file NIfTI-1 volume.

    Raises BadMagic, UnsupportedDims, UnsupportedDatatype or TruncatedFile
    per the declared subset.
    """
    if len(buf) < _HDR_SIZE:
        raise TruncatedFile(f"file has {len(buf)} bytes, header needs {_HDR_SIZE}")
    sizeof_hdr_le = struct.unpack_from("<i", buf, 0)[0]
    sizeof_hdr_be = struct.unpack_from(">i", buf, 0)[0]
    if sizeof_hdr_le == _HDR_SIZE:
        end = "<"
    elif sizeof_hdr_be == _HDR_SIZE:
        end = ">"
    else:
        raise BadMagic("sizeof_hdr is not 348 in either byte order")
    if buf[_MAGIC_OFFSET:_MAGIC_OFFSET + 4] != b"n+1\x00":
        raise BadMagic("magic bytes are not 'n+1\\0'")
    dim = struct.unpack_from(end + "8h", buf, 40)
    if dim[0] != 3:
        raise UnsupportedDims(f"dim[0] == {dim[0]}, only 3-D volumes supported")
    nx, ny, nz = (int(d) for d in dim[1:4])
    datatype = struct.unpack_from(end + "h", buf, 70)[0]
    if datatype not in (_DT_INT16, _DT_FLOAT32):
        raise UnsupportedDatatype(f"datatype code {datatype} not in (4, 16)")
    pixdim = struct.unpack_from(end + "8f", buf, 76)
    vox_offset = int(struct.unpack_from(end + "f", buf, 108)[0])
    scl_slope = struct.unpack_from(end + "f", buf, 112)[0]
    scl_inter = struct.unpack_from(end + "f", buf, 116)[0]

    count = nx * ny * nz
    dtype = np.dtype(end + ("i2" if datatype == _DT_INT16 else "f4"))
    need = vox_offset + count * dtype.itemsize
    if len(buf) < need:
        raise TruncatedFile(f"need {need} bytes, file has {len(buf)}")
    raw = np.frombuffer(buf, dtype=dtype, count=count, offset=vox_offset)
    vox = raw.astype(np.float32)
    if scl_slope != 0.0:
        vox = vox * np.float32(scl_slope) + np.float32(scl_inter)
    data = vox.reshape(nz, ny, nx)
    spacing = (float(pixdim[1]), float(pixdim[2]), float(pixdim[3]))
    return Volume(data=data, spacing_mm=spacing)


def write_nifti(volume: Volume) -> bytes:
    """Serialize a Volume as float32 .nii (the subset read_nifti accepts)."""
    nx, ny, nz = volume.dims
    hdr = bytearray(352)  # 348-byte header + 4 pad bytes, data at 352
    struct.pack_into("<i", hdr, 0, _HDR_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, _DT_FLOAT32)
    struct.pack_into("<h", hdr, 72, 32)  # bitpix
    sx, sy, sz = volume.spacing_mm
    struct.pack_into("<8f", hdr, 76, 1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, 352.0)  # vox_offset
    struct.pack_into("<f", hdr, 112, 0.0)  # scl_slope: no rescale
    struct.pack_into("<f", hdr, 116, 0.0)
    hdr[_MAGIC_OFFSET:_MAGIC_OFFSET + 4] = b"n+1\x00"
    body = np.ascontiguousarray(volume.data, dtype="<f4").tobytes()
    return bytes(hdr) + body


@dataclass(frozen=True)
class PhantomShape:
    """One analytic structure in a phantom scene.

    Ellipses include their boundary (<= 1); rectangles are half-open
    [c - e/2, c + e/2) per axis so an (8, 6) rectangle covers exactly
    48 pixel centers. slice_range is half-open [z0, z1).
    """

    kind: str  # "ellipse" | "rectangle"
    label: str
    center: tuple[float, float]  # (cx, cy) pixels
    size: tuple[float, float]  # radii (ellipse) or extents (rectangle)
    mean_hu: float
    noise_sigma: float = 0.0
    slice_range: tuple[int, int] | None = None  # default: all slices

    def __post_init__(self):
        if self.kind not in ("ellipse", "rectangle"):
            raise ValueError(f"unknown shape kind '{self.kind}'")
        DEFAULT_VOCABULARY.require(self.label)
        if self.size[0] <= 0 or self.size[1] <= 0:
            raise ValueError("shape size must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")

    def membership(self, width: int, height: int) -> np.ndarray:
        xs = np.arange(width, dtype=np.float64)
        ys = np.arange(height, dtype=np.float64)
        gx, gy = np.meshgrid(xs, ys)
        cx, cy = self.center
        a, b = self.size
        if self.kind == "ellipse":
            return ((gx - cx) / a) ** 2 + ((gy - cy) / b) ** 2 <= 1.0 + 1e-12
        return (
            (gx >= cx - a / 2) & (gx < cx + a / 2)
            & (gy >= cy - b / 2) & (gy < cy + b / 2)
        )


@dataclass(frozen=True)
class PhantomScene:
    """Deterministic synthetic CT scene with analytic ground truth."""

    dims: tuple[int, int, int]  # (nx, ny, nz)
    spacing_mm: tuple[float, float, float] = (1.0, 1.0, 1.0)
    background_hu: float = -1000.0
    shapes: tuple[PhantomShape, ...] = ()
    seed: int = 0

    def __post_init__(self):
        nx, ny, nz = self.dims
        if nx <= 0 or ny <= 0 or nz <= 0:
            raise ValueError("scene dims must be positive")
        for s in self.shapes:
            z0, z1 = self._slice_range(s)
            if not (0 <= z0 < z1 <= nz):
                raise ValueError(f"slice range {(z0, z1)} outside volume of {nz} slices")

    def _slice_range(self, shape: PhantomShape) -> tuple[int, int]:
        return shape.slice_range if shape.slice_range is not None else (0, self.dims[2])


@dataclass
class GroundTruth:
    """Per-slice, per-label analytic masks of a rendered phantom."""

    masks: dict[tuple[int, str], BinMask] = field(default_factory=dict)

    def mask_for(self, z: int, label: str) -> BinMask | None:
        return self.masks.get((z, label))

    def labels_on(self, z: int) -> list[str]:
        return sorted(label for (zz, label) in self.masks if zz == z)

    def bbox(self, z: int, label: str) -> BBox | None:
        m = self.mask_for(z, label)
        if m is None or m.area == 0:
            return None
        ys, xs = np.nonzero(m.data)
        return BBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


def render_phantom(scene: PhantomScene) -> tuple[Volume, GroundTruth]:
    """Render a scene to voxels plus analytic ground truth.

    Pure function of the scene including its seed. Inside-shape voxels take
    the shape's mean HU (offsets add where different-label shapes overlap);
    per-shape Gaussian noise is drawn from a counter-based generator so the
    result is platform-stable. Same-label overlap on a slice raises
    OverlapError to keep the ground truth unambiguous.
    """
    nx, ny, nz = scene.dims
    data = np.full((nz, ny, nx), scene.background_hu, dtype=np.float32)
    gt = GroundTruth()
    memberships = [s.membership(nx, ny) for s in scene.shapes]
    seeds = np.random.SeedSequence(scene.seed).spawn(max(len(scene.shapes), 1))
    for idx, shape in enumerate(scene.shapes):
        member = memberships[idx]
        z0, z1 = scene._slice_range(shape)
        rng = np.random.Generator(np.random.Philox(seeds[idx]))
        for z in range(z0, z1):
            key = (z, shape.label)
            prev = gt.masks.get(key)
            if prev is not None and bool(np.any(prev.data & member)):
                raise OverlapError(
                    f"two '{shape.label}' shapes overlap on slice {z}"
                )
            plane = data[z]
            contribution = np.where(member, shape.mean_hu - scene.background_hu, 0.0)
            plane += contribution.astype(np.float32)
            if shape.noise_sigma > 0:
                noise = rng.normal(0.0, shape.noise_sigma, size=member.shape)
                plane += np.where(member, noise, 0.0).astype(np.float32)
            gt.masks[key] = BinMask(prev.data | member) if prev is not None else BinMask(member)
    return Volume(data=data, spacing_mm=scene.spacing_mm), gt


def slice_transversal(volume: Volume, z: int) -> HuImage:
    """Copy transversal plane z as a 2-D HU image (spacing (sy, sx))."""
    nx, ny, nz = volume.dims
    if not 0 <= z < nz:
        raise IndexOutOfRange(f"slice {z} outside [0, {nz})")
    sx, sy, _ = volume.spacing_mm
    return HuImage(volume.data[z].copy(), spacing_mm=(sy, sx))


def scene_from_json(doc: str | bytes | dict) -> PhantomScene:
    """Parse the phantom scene JSON document (schema in docs/phantom-scene.md)."""
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    shapes = tuple(
        PhantomShape(
            kind=s["kind"],
            label=s["label"],
            center=tuple(s["center"]),
            size=tuple(s.get("radii") or s.get("extents") or s["size"]),
            mean_hu=float(s["mean_hu"]),
            noise_sigma=float(s.get("noise_sigma", 0.0)),
            slice_range=tuple(s["slice_range"]) if "slice_range" in s else None,
        )
        for s in doc.get("shapes", [])
    )
    return PhantomScene(
        dims=tuple(doc["dims"]),
        spacing_mm=tuple(doc.get("spacing_mm", (1.0, 1.0, 1.0))),
        background_hu=float(doc.get("background_hu", -1000.0)),
        shapes=shapes,
        seed=int(doc.get("seed", 0)),
    )


def scene_to_json(scene: PhantomScene) -> dict:
    return {
        "dims": list(scene.dims),
        "spacing_mm": list(scene.spacing_mm),
        "background_hu": scene.background_hu,
        "seed": scene.seed,
        "shapes": [
            {
                "kind": s.kind,
                "label": s.label,
                "center": list(s.center),
                "size": list(s.size),
                "mean_hu": s.mean_hu,
                "noise_sigma": s.noise_sigma,
                **({"slice_range": list(s.slice_range)} if s.slice_range else {}),
            }
            for s in scene.shapes
        ],
    }
