"""Detector and segmentation evaluation: IoU, COCO-protocol average
precision (greedy matching, 101-point interpolated area), the
crop/window/margin ablation harness, and per-session Dice trajectories.

Determinism: predictions are stably sorted by descending score (input
order breaks ties); a prediction matches the unmatched ground-truth box
with the highest IoU, first one on ties.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .backends import SegmentPrompt, SyntheticBackend
from .core import BBox, BinMask, HuImage, clamp_box, expand_box
from .errors import EmptyCorpus, MissingGroundTruth
from .imaging import DEFAULT_PRESETS, WindowPresets, paste_mask, window_normalize
from .maskops import dice, threshold

COCO_IOU_THRESHOLDS: tuple[float, ...] = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))

PredBox = tuple[str, BBox, float]  # (image_id, box, score), one class
GtBox = tuple[str, BBox]           # (image_id, box), one class


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two half-open boxes."""
    ix0, iy0 = max(a.x0, b.x0), max(a.y0, b.y0)
    ix1, iy1 = min(a.x1, b.x1), min(a.y1, b.y1)
    inter = max(0, ix1 - ix0) * max(0, iy1 - iy0)
    union = a.area + b.area - inter
    return inter / union if union else 0.0


def _match_flags(preds: list[PredBox], gts: list[GtBox], iou_thresh: float) -> list[bool]:
    """Greedy matching by descending score; each gt claimed at most once."""
    order = sorted(range(len(preds)), key=lambda i: (-preds[i][2], i))
    taken: set[int] = set()
    flags = [False] * len(preds)
    for i in order:
        img_id, box, _ = preds[i]
        best_iou, best_j = 0.0, -1
        for j, (g_img, g_box) in enumerate(gts):
            if g_img != img_id or j in taken:
                continue
            v = iou(box, g_box)
            if v > best_iou:
                best_iou, best_j = v, j
        if best_j >= 0 and best_iou >= iou_thresh:
            taken.add(best_j)
            flags[i] = True
    return flags


def average_precision(preds: list[PredBox], gts: list[GtBox], iou_thresh: float) -> float:
    """Single-class AP: greedy matching then 101-point interpolated PR area."""
    if not gts:
        return 0.0
    if not preds:
        return 0.0
    order = sorted(range(len(preds)), key=lambda i: (-preds[i][2], i))
    flags = _match_flags(preds, gts, iou_thresh)
    tp = np.cumsum([1 if flags[i] else 0 for i in order], dtype=np.float64)
    fp = np.cumsum([0 if flags[i] else 1 for i in order], dtype=np.float64)
    recall = tp / len(gts)
    precision = tp / np.maximum(tp + fp, 1e-12)
    ap = 0.0
    for r in np.linspace(0.0, 1.0, 101):
        mask = recall >= r - 1e-12
        ap += float(precision[mask].max()) / 101.0 if mask.any() else 0.0
    return ap


@dataclass(frozen=True)
class EvalResult:
    """Per-class AP over the IoU threshold grid plus the summary triple."""

    ap: dict[str, dict[float, float]]
    map_all: float
    map50: float
    map75: float
    per_organ_dice: dict[str, float] | None = None

    def as_dict(self) -> dict:
        doc = {
            "mAP": self.map_all,
            "mAP@50": self.map50,
            "mAP@75": self.map75,
            "per_class_ap": {k: {f"{t:.2f}": v for t, v in d.items()}
                             for k, d in self.ap.items()},
        }
        if self.per_organ_dice is not None:
            doc["per_organ_dice"] = self.per_organ_dice
        return doc


def evaluate_detections(preds: list[tuple[str, BBox, str, float]],
                        gts: list[tuple[str, BBox, str]],
                        iou_thresholds: tuple[float, ...] = COCO_IOU_THRESHOLDS,
                        per_organ_dice: dict[str, float] | None = None) -> EvalResult:
    """AP per class present in the ground truth, averaged into the mAP triple.

    preds: (image_id, box, label, score); gts: (image_id, box, label).
    Predictions for labels absent from the ground truth are ignored.
    """
    classes = sorted({label for _, _, label in gts})
    ap: dict[str, dict[float, float]] = {}
    for label in classes:
        cls_preds = [(i, b, s) for i, b, lab, s in preds if lab == label]
        cls_gts = [(i, b) for i, b, lab in gts if lab == label]
        ap[label] = {
            t: average_precision(cls_preds, cls_gts, t) for t in iou_thresholds
        }
    if not classes:
        return EvalResult(ap={}, map_all=0.0, map50=0.0, map75=0.0,
                          per_organ_dice=per_organ_dice)
    all_vals = [v for d in ap.values() for v in d.values()]
    at = lambda t: float(np.mean([d[t] for d in ap.values()]))  # noqa: E731
    return EvalResult(
        ap=ap,
        map_all=float(np.mean(all_vals)),
        map50=at(0.5) if 0.5 in iou_thresholds else 0.0,
        map75=at(0.75) if 0.75 in iou_thresholds else 0.0,
        per_organ_dice=per_organ_dice,
    )


# --- JSONL interchange -------------------------------------------------------

def load_predictions_jsonl(text: str) -> list[tuple[str, BBox, str, float]]:
    """One object per image: {image_id, boxes, labels, scores}."""
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        for box, label, score in zip(doc["boxes"], doc["labels"], doc["scores"]):
            out.append((str(doc["image_id"]), BBox(*(int(v) for v in box)),
                        str(label), float(score)))
    return out


def load_ground_truth_jsonl(text: str) -> list[tuple[str, BBox, str]]:
    """One object per image: {image_id, gt_boxes, gt_labels}."""
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        for box, label in zip(doc["gt_boxes"], doc["gt_labels"]):
            out.append((str(doc["image_id"]), BBox(*(int(v) for v in box)), str(label)))
    return out


# --- ablation harness --------------------------------------------------------

@dataclass(frozen=True)
class AblationCase:
    """One evaluation unit: a slice, a target label, and its analytic mask."""

    image: HuImage
    label: str
    gt_mask: BinMask


@dataclass(frozen=True)
class AblationRow:
    crop: str     # "full" | "box"
    window: str   # "default" | "organ"
    margin: int
    mean_dice: float
    cases: int


def _segment_case(case: AblationCase, crop: str, window_kind: str, margin: int,
                  backend, presets: WindowPresets) -> float:
    dets = backend.detect(case.image.data, [case.label])
    if dets:
        box = dets[0].box
    else:
        ys, xs = np.nonzero(case.gt_mask.data)
        box = BBox(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
    window = presets.default if window_kind == "default" else presets.for_organ(case.label)
    w, h = case.image.width, case.image.height
    effective = clamp_box(expand_box(box, margin), w, h)
    if crop == "box":
        pixels = window_normalize(
            case.image.data[effective.y0:effective.y1, effective.x0:effective.x1], window)
        prompt = SegmentPrompt(pixels=pixels,
                               box=BBox(0, 0, effective.width, effective.height),
                               clicks=(), window=window)
        prob = backend.segment(prompt)
        mask = paste_mask(threshold(prob, 0.5), (effective.x0, effective.y0), w, h)
    else:
        pixels = window_normalize(case.image.data, window)
        prompt = SegmentPrompt(pixels=pixels, box=effective, clicks=(), window=window)
        prob = backend.segment(prompt)
        mask = threshold(prob, 0.5)
    return dice(mask, case.gt_mask)


def run_ablation(cases: list[AblationCase], *,
                 crops: tuple[str, ...] = ("full", "box"),
                 windows: tuple[str, ...] = ("default", "organ"),
                 margins: tuple[int, ...] = (0, 10, 20),
                 backend=None,
                 presets: WindowPresets = DEFAULT_PRESETS) -> list[AblationRow]:
    """Mean Dice for every crop x window x margin configuration."""
    if not cases:
        raise EmptyCorpus("ablation corpus is empty")
    backend = backend if backend is not None else SyntheticBackend()
    rows = []
    for crop in crops:
        for window_kind in windows:
            for margin in margins:
                scores = [
                    _segment_case(case, crop, window_kind, margin, backend, presets)
                    for case in cases
                ]
                rows.append(AblationRow(crop=crop, window=window_kind, margin=margin,
                                        mean_dice=float(np.mean(scores)),
                                        cases=len(scores)))
    return rows


def ablation_csv(rows: list[AblationRow]) -> str:
    """CSV with one row per configuration; column layout documented in docs."""
    lines = ["crop,window,margin,mean_dice,cases"]
    for r in rows:
        lines.append(f"{r.crop},{r.window},{r.margin},{r.mean_dice:.6f},{r.cases}")
    return "\n".join(lines) + "\n"


def corpus_from_scenes(scenes: list[tuple]) -> list[AblationCase]:
    """Render (scene, label) pairs into ablation cases, all slices."""
    from .volume_io import render_phantom, slice_transversal

    cases = []
    for scene, label in scenes:
        volume, gt = render_phantom(scene)
        for z in range(scene.dims[2]):
            mask = gt.mask_for(z, label)
            if mask is None or mask.area == 0:
                continue
            cases.append(AblationCase(image=slice_transversal(volume, z),
                                      label=label, gt_mask=mask))
    return cases


# --- session trajectories ----------------------------------------------------

def dice_trajectory(export: dict) -> dict:
    """(step, dice) series along the root-to-final path plus a verdict.

    The export must carry per-step dice values (evaluation mode); the final
    step defaults to the cursor when none was selected.
    """
    steps = {s["id"]: s for s in export["steps"]}
    if any("dice" not in s for s in steps.values()):
        raise MissingGroundTruth("session export carries no dice values")
    final = export.get("final")
    if final is None:
        final = export["cursor"]
    path = []
    node = steps[final]
    while True:
        path.append(node)
        if node["parent"] is None:
            break
        node = steps[node["parent"]]
    path.reverse()
    series = [{"step": s["id"], "dice": s["dice"]} for s in path]
    delta = series[-1]["dice"] - series[0]["dice"]
    verdict = "improved" if delta > 0 else ("worse" if delta < 0 else "unchanged")
    return {
        "series": series,
        "summary": {"verdict": verdict, "delta_dice": delta,
                    "initial_dice": series[0]["dice"], "final_dice": series[-1]["dice"]},
    }
