"""Training-data pipeline: deterministic 80/10/10 splits, slice records
with preprocessing (clip, foreground z-score, resample, augment), and
grounding-prompt generation with sampled negative labels.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .core import BBox, BinMask, HuImage, LabelVocabulary, DEFAULT_VOCABULARY
from .errors import EmptyForeground, TooManyNegatives
from .imaging import (
    AugmentSpec,
    COMMON_SIZE_PX,
    COMMON_SPACING_MM,
    augment,
    percentile_clip,
    resample,
    zscore_foreground,
)
from .volume_io import GroundTruth, Volume, slice_transversal

SPLIT_FRACTIONS = (0.8, 0.1, 0.1)
DEFAULT_NUM_ADD_LAB = 8  # best-performing negative-label count
BODY_HU_THRESHOLD = -500.0  # fallback foreground for z-scoring


@dataclass(frozen=True)
class Split:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]


def _hash_rank(seed: int, item: str) -> str:
    return hashlib.sha256(f"{seed}:{item}".encode()).hexdigest()


def split(ids: list[str], seed: int, groups: dict[str, str] | None = None) -> Split:
    """Deterministic 80/10/10 assignment, per source group, then pooled.

    Ids are ranked by a seeded hash and cut at the exact fractions
    (val/test sizes round half away from the train share), so 100 ids
    always give 80/10/10. Requires at least 10 ids overall.
    """
    if len(ids) < 10:
        raise ValueError("need at least 10 ids to split")
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique")
    by_group: dict[str, list[str]] = {}
    for item in ids:
        by_group.setdefault(groups.get(item, "") if groups else "", []).append(item)
    train: list[str] = []
    val: list[str] = []
    test: list[str] = []
    for _, members in sorted(by_group.items()):
        ranked = sorted(members, key=lambda m: (_hash_rank(seed, m), m))
        n = len(ranked)
        n_val = max(1, round(SPLIT_FRACTIONS[1] * n)) if n >= 3 else (1 if n >= 2 else 0)
        n_test = max(1, round(SPLIT_FRACTIONS[2] * n)) if n >= 3 else 0
        n_train = n - n_val - n_test
        train.extend(ranked[:n_train])
        val.extend(ranked[n_train:n_train + n_val])
        test.extend(ranked[n_train + n_val:])
    return Split(train=tuple(train), val=tuple(val), test=tuple(test))


def make_prompt(present_labels: list[str], vocab: LabelVocabulary = DEFAULT_VOCABULARY,
                num_add_lab: int = DEFAULT_NUM_ADD_LAB, seed: int = 0
                ) -> tuple[str, dict[str, tuple[int, int]]]:
    """Label-sequence prompt: present labels plus sampled negatives,
    shuffled, joined by '. ' with a trailing '.'.

    Returns the prompt and each label's character span.
    """
    present = list(dict.fromkeys(present_labels))
    for label in present:
        vocab.require(label)
    absent = [lab for lab in vocab if lab not in present]
    if num_add_lab > len(absent):
        raise TooManyNegatives(
            f"asked for {num_add_lab} negatives, only {len(absent)} labels absent")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    negatives = list(rng.choice(np.array(absent, dtype=object), size=num_add_lab,
                                replace=False)) if num_add_lab else []
    labels = present + [str(n) for n in negatives]
    rng.shuffle(labels)
    prompt = ". ".join(labels) + "."
    spans: dict[str, tuple[int, int]] = {}
    pos = 0
    for label in labels:
        spans[label] = (pos, pos + len(label))
        pos += len(label) + 2  # ". " separator
    return prompt, spans


@dataclass(frozen=True)
class EmitConfig:
    out_dir: str
    seed: int = 0
    num_add_lab: int = DEFAULT_NUM_ADD_LAB
    target_spacing_mm: tuple[float, float] = COMMON_SPACING_MM
    target_size_px: tuple[int, int] = COMMON_SIZE_PX
    augment_prob: float = 0.10
    clip_percentiles: tuple[float, float] = (0.5, 99.5)


def _slice_seed(seed: int, volume_id: str, z: int) -> int:
    digest = hashlib.sha256(f"{seed}:{volume_id}:{z}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _tight_box(mask: BinMask) -> BBox | None:
    ys, xs = np.nonzero(mask.data)
    if xs.size == 0:
        return None
    return BBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


def _resample_mask(mask: BinMask, spacing, target_spacing, target_size) -> BinMask:
    # ride the image resampler on a 0/1 grid, then re-binarize
    carrier = HuImage(mask.data.astype(np.float32), spacing_mm=spacing)
    out = resample(carrier, target_spacing, target_size)
    return BinMask(out.data >= 0.5)


def emit_records(volume_id: str, volume: Volume, gt: GroundTruth,
                 config: EmitConfig, vocab: LabelVocabulary = DEFAULT_VOCABULARY
                 ) -> list[str]:
    """Write one JSONL record + 16-bit PNG per slice that shows any organ.

    Preprocessing order: percentile clip, foreground z-score, resample,
    augment; boxes are tight bboxes of each organ's transformed mask.
    Deterministic for a fixed config seed; files are written atomically.
    Returns the written record paths.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    written = []
    nx, ny, nz = volume.dims
    for z in range(nz):
        labels = [lab for lab in gt.labels_on(z) if gt.mask_for(z, lab).area > 0]
        if not labels:
            continue  # nothing to supervise
        img = slice_transversal(volume, z)
        masks = [gt.mask_for(z, lab) for lab in labels]

        img = percentile_clip(img, *config.clip_percentiles)
        fg_union = np.zeros(img.data.shape, dtype=bool)
        for m in masks:
            fg_union |= m.data
        fg = BinMask(fg_union) if fg_union.any() else BinMask(img.data > BODY_HU_THRESHOLD)
        try:
            zdata = zscore_foreground(img, fg)
        except EmptyForeground:
            zdata = img.data.astype(np.float32)
        img = HuImage(zdata, spacing_mm=img.spacing_mm)

        img = resample(img, config.target_spacing_mm, config.target_size_px)
        masks = [
            _resample_mask(m, slice_transversal(volume, z).spacing_mm,
                           config.target_spacing_mm, config.target_size_px)
            for m in masks
        ]

        spec = AugmentSpec(p_translate=config.augment_prob,
                           p_rotate=config.augment_prob,
                           p_scale=config.augment_prob,
                           seed=_slice_seed(config.seed, volume_id, z))
        img, _, masks = augment(img, [], spec, masks=tuple(masks))

        boxes, kept_labels, kept_masks = [], [], []
        for lab, mask in zip(labels, masks):
            box = _tight_box(mask)
            if box is None:
                continue  # transform pushed the organ out of frame
            boxes.append(box)
            kept_labels.append(lab)
            kept_masks.append(mask)
        if not boxes:
            continue

        prompt, spans = make_prompt(kept_labels, vocab, config.num_add_lab,
                                    seed=_slice_seed(config.seed + 1, volume_id, z))

        vmin = float(img.data.min())
        vmax = float(img.data.max())
        scale = (vmax - vmin) if vmax > vmin else 1.0
        encoded = np.round((img.data - vmin) / scale * 65535.0).astype(np.uint16)
        png_name = f"{volume_id}_z{z:04d}.png"
        rec_name = f"{volume_id}_z{z:04d}.jsonl"
        png_path = os.path.join(config.out_dir, png_name)
        rec_path = os.path.join(config.out_dir, rec_name)
        _atomic_write(png_path, _png16_bytes(encoded))
        record = {
            "image": png_name,
            "image_id": f"{volume_id}_z{z:04d}",
            "width": img.width,
            "height": img.height,
            "vmin": vmin,
            "vmax": vmax,
            "boxes": [list(b.as_tuple()) for b in boxes],
            "labels": kept_labels,
            "prompt": prompt,
            "spans": {k: list(v) for k, v in spans.items()},
        }
        _atomic_write(rec_path, (json.dumps(record, sort_keys=True) + "\n").encode())
        written.append(rec_path)
    return written


def _png16_bytes(arr: np.ndarray) -> bytes:
    import io

    img = Image.fromarray(arr.astype(np.uint16))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def _atomic_write(path: str, data: bytes):
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
