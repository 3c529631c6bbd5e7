import struct

import numpy as np
import pytest

from limis.errors import (
    BadMagic,
    IndexOutOfRange,
    OverlapError,
    TruncatedFile,
    UnsupportedDatatype,
    UnsupportedDims,
)
from limis.volume_io import (
    PhantomScene,
    PhantomShape,
    Volume,
    read_nifti,
    render_phantom,
    scene_from_json,
    scene_to_json,
    slice_transversal,
    write_nifti,
)

from .oracles import bbox_of_pixels, ellipse_pixels, rect_pixels


def _handmade_nifti(datatype=16, dim0=3, endian="<", magic=b"n+1\x00",
                    truncate=0, scl=(0.0, 0.0)):
    hdr = bytearray(352)
    struct.pack_into(endian + "i", hdr, 0, 348)
    struct.pack_into(endian + "8h", hdr, 40, dim0, 4, 4, 2, 1, 1, 1, 1)
    struct.pack_into(endian + "h", hdr, 70, datatype)
    struct.pack_into(endian + "8f", hdr, 76, 1.0, 1.5, 1.5, 3.0, 0, 0, 0, 0)
    struct.pack_into(endian + "f", hdr, 108, 352.0)
    struct.pack_into(endian + "f", hdr, 112, scl[0])
    struct.pack_into(endian + "f", hdr, 116, scl[1])
    hdr[344:348] = magic
    values = np.arange(32, dtype=np.float64)
    if datatype == 4:
        body = values.astype(endian + "i2").tobytes()
    else:
        body = values.astype(endian + "f4").tobytes()
    buf = bytes(hdr) + body
    return buf[: len(buf) - truncate] if truncate else buf


def test_read_handmade_float32():
    vol = read_nifti(_handmade_nifti())
    assert vol.dims == (4, 4, 2)
    assert vol.spacing_mm == (1.5, 1.5, 3.0)
    np.testing.assert_array_equal(
        vol.data.reshape(-1), np.arange(32, dtype=np.float32)
    )


def test_read_big_endian():
    vol = read_nifti(_handmade_nifti(endian=">"))
    assert vol.dims == (4, 4, 2)
    np.testing.assert_array_equal(vol.data.reshape(-1), np.arange(32, dtype=np.float32))


def test_read_int16_with_rescale():
    vol = read_nifti(_handmade_nifti(datatype=4, scl=(2.0, -10.0)))
    np.testing.assert_array_equal(
        vol.data.reshape(-1), np.arange(32, dtype=np.float32) * 2.0 - 10.0
    )


def test_bad_magic():
    with pytest.raises(BadMagic):
        read_nifti(_handmade_nifti(magic=b"\x00\x00\x00\x00"))
    with pytest.raises(BadMagic):
        read_nifti(b"\x00" * 400)


def test_unsupported_datatype_uint8():
    with pytest.raises(UnsupportedDatatype):
        read_nifti(_handmade_nifti(datatype=2))


def test_unsupported_dims():
    with pytest.raises(UnsupportedDims):
        read_nifti(_handmade_nifti(dim0=4))


def test_truncated():
    with pytest.raises(TruncatedFile):
        read_nifti(_handmade_nifti(truncate=8))
    with pytest.raises(TruncatedFile):
        read_nifti(_handmade_nifti()[:100])


def test_roundtrip_bit_exact():
    rng = np.random.default_rng(7)
    for _ in range(5):
        nx, ny, nz = rng.integers(2, 9, size=3)
        vol = Volume(
            data=rng.normal(0, 500, size=(nz, ny, nx)).astype(np.float32),
            spacing_mm=(1.5, 0.75, 3.0),
        )
        again = read_nifti(write_nifti(vol))
        assert again == vol


LIVER_SCENE = PhantomScene(
    dims=(64, 64, 1),
    shapes=(
        PhantomShape("ellipse", "liver", center=(32, 30), size=(12, 10), mean_hu=60.0),
    ),
)


def test_phantom_ellipse_bbox_matches_oracle():
    _, gt = render_phantom(LIVER_SCENE)
    pixels = ellipse_pixels(32, 30, 12, 10, 64, 64)
    assert gt.bbox(0, "liver").as_tuple() == bbox_of_pixels(pixels)
    assert gt.bbox(0, "liver").as_tuple() == (20, 20, 45, 41)
    mask = gt.mask_for(0, "liver")
    got = {(x, y) for y, x in zip(*np.nonzero(mask.data))}
    assert got == pixels


def test_phantom_rectangle_area():
    scene = PhantomScene(
        dims=(32, 32, 1),
        shapes=(
            PhantomShape("rectangle", "bladder", center=(10, 10), size=(8, 6), mean_hu=15.0),
        ),
    )
    _, gt = render_phantom(scene)
    assert gt.mask_for(0, "bladder").area == 48
    assert {(x, y) for y, x in zip(*np.nonzero(gt.mask_for(0, "bladder").data))} == \
        rect_pixels(10, 10, 8, 6, 32, 32)


def test_phantom_values_and_determinism():
    vol, gt = render_phantom(LIVER_SCENE)
    inside = gt.mask_for(0, "liver").data
    assert np.all(vol.data[0][inside] == 60.0)
    assert np.all(vol.data[0][~inside] == -1000.0)
    vol2, _ = render_phantom(LIVER_SCENE)
    assert vol2 == vol
    noisy = PhantomScene(
        dims=(64, 64, 2), seed=42,
        shapes=(
            PhantomShape("ellipse", "liver", center=(32, 30), size=(12, 10),
                         mean_hu=60.0, noise_sigma=5.0),
        ),
    )
    n1, _ = render_phantom(noisy)
    n2, _ = render_phantom(noisy)
    assert n1 == n2
    assert not np.array_equal(n1.data, render_phantom(LIVER_SCENE)[0].data[:1])


def test_phantom_same_label_overlap_rejected():
    scene = PhantomScene(
        dims=(32, 32, 1),
        shapes=(
            PhantomShape("ellipse", "liver", center=(10, 10), size=(5, 5), mean_hu=60.0),
            PhantomShape("ellipse", "liver", center=(12, 10), size=(5, 5), mean_hu=60.0),
        ),
    )
    with pytest.raises(OverlapError):
        render_phantom(scene)
    ok = PhantomScene(
        dims=(32, 32, 1),
        shapes=(
            PhantomShape("ellipse", "liver", center=(8, 8), size=(3, 3), mean_hu=60.0),
            PhantomShape("ellipse", "spleen", center=(10, 8), size=(3, 3), mean_hu=165.0),
        ),
    )
    render_phantom(ok)  # different labels may overlap


def test_slice_transversal():
    vol = read_nifti(_handmade_nifti())
    img = slice_transversal(vol, 1)
    assert img.width == 4 and img.height == 4
    assert img.spacing_mm == (1.5, 1.5)
    np.testing.assert_array_equal(img.data, vol.data[1])
    with pytest.raises(IndexOutOfRange):
        slice_transversal(vol, 2)
    vol_p, gt = render_phantom(LIVER_SCENE)
    sl = slice_transversal(vol_p, 0)
    assert np.all(sl.data[gt.mask_for(0, "liver").data] == 60.0)


def test_slice_then_restack_reproduces_volume():
    vol, _ = render_phantom(PhantomScene(
        dims=(16, 12, 3), spacing_mm=(1.0, 1.0, 2.5),
        shapes=(PhantomShape("ellipse", "spleen", center=(8, 6), size=(4, 3),
                             mean_hu=165.0, noise_sigma=3.0, slice_range=(1, 3)),),
        seed=5,
    ))
    planes = [slice_transversal(vol, z).data for z in range(3)]
    np.testing.assert_array_equal(np.stack(planes), vol.data)


def test_scene_json_roundtrip():
    doc = scene_to_json(LIVER_SCENE)
    again = scene_from_json(doc)
    assert again == LIVER_SCENE
    import json
    assert scene_from_json(json.dumps(doc)) == LIVER_SCENE
