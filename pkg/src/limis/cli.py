"""Command-line entry points: serve the HTTP API, run a terminal session,
prepare training records, evaluate detections/segmentation, and render
phantom volumes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import LimisError, ParseError


def _load_image_file(path: str):
    """A .nii volume or a phantom scene JSON; returns (volume, gt or None)."""
    from .volume_io import read_nifti, render_phantom, scene_from_json

    data = Path(path).read_bytes()
    try:
        scene = scene_from_json(data)
        return render_phantom(scene)
    except (ValueError, KeyError, json.JSONDecodeError, UnicodeDecodeError):
        return read_nifti(data), None


def _backend_from_args(args):
    from .backends import RemoteBackend, SyntheticBackend

    if getattr(args, "backend", "synthetic") == "remote":
        if not args.remote_url:
            raise SystemExit("--backend remote requires --remote-url")
        return RemoteBackend(args.remote_url)
    return SyntheticBackend()


def _presets_from_args(args):
    from .imaging import DEFAULT_PRESETS, load_window_presets

    return load_window_presets(args.presets) if getattr(args, "presets", None) else DEFAULT_PRESETS


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    data_dir = os.environ.get("LIMIS_DATA_DIR", args.data_dir)
    config = ServiceConfig(
        backend=args.backend,
        remote_url=args.remote_url,
        presets_path=args.presets,
        data_dir=data_dir,
        ui_dir=args.ui_dir,
    )
    uvicorn.run(create_app(config), host=args.host, port=args.port, log_level="info")
    return 0


def cmd_session(args) -> int:
    from .commands import parse
    from .engine import create_session
    from .volume_io import slice_transversal

    volume, gt = _load_image_file(args.image)
    image = slice_transversal(volume, args.slice)
    gt_mask = gt.mask_for(args.slice, args.label) if gt is not None else None
    session = create_session(
        image, args.label, _backend_from_args(args),
        presets=_presets_from_args(args), gt=gt_mask,
        image_ref=f"{args.image}#z{args.slice}",
    )
    out = sys.stdout
    state = session.steps[0].state

    def report(step):
        line = (f"step {step.id} (parent {step.parent_id}): {step.op['kind']}, "
                f"box {step.state.box.as_tuple()}, tau {step.state.tau:g}, "
                f"mask {step.state.mask.area} px")
        if session.dice_log is not None:
            line += f", dice {session.dice_log[step.id]:.4f}"
        print(line, file=out)

    print(f"session on {args.image} slice {args.slice}, target '{args.label}'", file=out)
    if not session.detections and state.mask.area == 0:
        print("no detection; place the box manually (e.g. 'shift box 10 0')", file=out)
    report(session.steps[0])
    print("type commands ('help' lists them); 'quit' exits", file=out)
    for line in sys.stdin:
        text = line.strip()
        if not text:
            continue
        if text in ("quit", "exit"):
            break
        try:
            outcome = session.apply_command(parse(text))
        except ParseError as exc:
            print(f"parse error: {exc.message}", file=out)
            if exc.suggestions:
                print("did you mean: " + "; ".join(exc.suggestions), file=out)
            continue
        except LimisError as exc:
            print(f"error: {exc}", file=out)
            continue
        if outcome.step is not None:
            report(outcome.step)
        if outcome.critical_points is not None:
            for i, p in enumerate(outcome.critical_points):
                print(f"  critical point {i}: ({p.x}, {p.y}) |p-tau|={p.ambiguity:.3f}",
                      file=out)
        if outcome.previews is not None:
            for p in outcome.previews:
                print(f"  preview: {p['command']}", file=out)
        if outcome.help_text is not None:
            print(outcome.help_text, file=out)
        if outcome.kind in ("accept", "revert"):
            print(f"cursor at step {session.cursor}", file=out)
    if args.export:
        Path(args.export).write_text(session.export_json())
        print(f"session export written to {args.export}", file=out)
    return 0


def cmd_prep(args) -> int:
    from .dataprep import EmitConfig, emit_records, split
    from .volume_io import render_phantom, scene_from_json

    config = EmitConfig(
        out_dir=args.out,
        seed=args.seed,
        num_add_lab=args.num_add_lab,
        target_spacing_mm=tuple(args.spacing),
        target_size_px=tuple(args.size),
    )
    volume_ids = []
    for scene_path in args.scenes:
        scene = scene_from_json(Path(scene_path).read_bytes())
        volume, gt = render_phantom(scene)
        volume_id = Path(scene_path).stem
        volume_ids.append(volume_id)
        written = emit_records(volume_id, volume, gt, config)
        print(f"{volume_id}: {len(written)} records")
    if len(volume_ids) >= 10:
        parts = split(volume_ids, seed=args.seed)
        split_path = Path(args.out) / "split.json"
        split_path.write_text(json.dumps(
            {"train": list(parts.train), "val": list(parts.val), "test": list(parts.test)},
            indent=2, sort_keys=True))
        print(f"split written to {split_path}")
    return 0


def cmd_eval_detect(args) -> int:
    from .metrics import evaluate_detections, load_ground_truth_jsonl, load_predictions_jsonl

    preds = load_predictions_jsonl(Path(args.preds).read_text())
    gts = load_ground_truth_jsonl(Path(args.gt).read_text())
    result = evaluate_detections(preds, gts)
    doc = result.as_dict()
    print(f"mAP {result.map_all:.4f}  mAP@50 {result.map50:.4f}  mAP@75 {result.map75:.4f}")
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True))
        print(f"report written to {args.out}")
    return 0


def cmd_eval_seg(args) -> int:
    from .metrics import ablation_csv, corpus_from_scenes, run_ablation
    from .volume_io import scene_from_json

    scenes = []
    for scene_path in args.scenes:
        doc = json.loads(Path(scene_path).read_text())
        label = doc.get("target_label") or doc["shapes"][0]["label"]
        scenes.append((scene_from_json(doc), label))
    cases = corpus_from_scenes(scenes)
    rows = run_ablation(cases, backend=_backend_from_args(args),
                        presets=_presets_from_args(args))
    csv_text = ablation_csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text)
        print(f"ablation table written to {args.out}")
    else:
        print(csv_text, end="")
    return 0


def cmd_phantom(args) -> int:
    from .maskops import mask_to_png
    from .volume_io import render_phantom, scene_from_json, write_nifti

    scene = scene_from_json(Path(args.scene).read_bytes())
    volume, gt = render_phantom(scene)
    Path(args.out).write_bytes(write_nifti(volume))
    nx, ny, nz = volume.dims
    print(f"wrote {args.out}: {nx}x{ny}x{nz} @ {volume.spacing_mm} mm")
    if args.gt_dir:
        os.makedirs(args.gt_dir, exist_ok=True)
        for (z, label), mask in sorted(gt.masks.items()):
            name = f"z{z:04d}_{label.replace(' ', '_')}.png"
            Path(args.gt_dir, name).write_bytes(mask_to_png(mask))
        print(f"ground-truth masks written to {args.gt_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="limis",
                                     description="language-driven interactive CT segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--backend", choices=("synthetic", "remote"), default="synthetic")
    serve.add_argument("--remote-url", default=None)
    serve.add_argument("--presets", default=None, help="window preset JSON file")
    serve.add_argument("--data-dir", default=None,
                       help="output directory (env LIMIS_DATA_DIR overrides)")
    serve.add_argument("--ui-dir", default=None, help="static web UI bundle to serve")
    serve.set_defaults(func=cmd_serve)

    session = sub.add_parser("session", help="interactive terminal session")
    session.add_argument("--image", required=True, help=".nii volume or phantom scene JSON")
    session.add_argument("--slice", type=int, required=True)
    session.add_argument("--label", required=True)
    session.add_argument("--backend", choices=("synthetic", "remote"), default="synthetic")
    session.add_argument("--remote-url", default=None)
    session.add_argument("--presets", default=None)
    session.add_argument("--export", default=None, help="write the session export here")
    session.set_defaults(func=cmd_session)

    prep = sub.add_parser("prep", help="emit training records from phantom scenes")
    prep.add_argument("--scenes", nargs="+", required=True)
    prep.add_argument("--out", required=True)
    prep.add_argument("--seed", type=int, default=0)
    prep.add_argument("--num-add-lab", type=int, default=8)
    prep.add_argument("--size", type=int, nargs=2, default=[512, 512],
                      metavar=("W", "H"))
    prep.add_argument("--spacing", type=float, nargs=2, default=[1.5, 1.5],
                      metavar=("ROW", "COL"))
    prep.set_defaults(func=cmd_prep)

    evaluate = sub.add_parser("eval", help="evaluation harnesses")
    eval_sub = evaluate.add_subparsers(dest="eval_command", required=True)
    detect = eval_sub.add_parser("detect", help="mAP on JSONL predictions vs ground truth")
    detect.add_argument("--preds", required=True)
    detect.add_argument("--gt", required=True)
    detect.add_argument("--out", default=None)
    detect.set_defaults(func=cmd_eval_detect)
    seg = eval_sub.add_parser("seg", help="crop/window/margin ablation on phantom scenes")
    seg.add_argument("--scenes", nargs="+", required=True)
    seg.add_argument("--out", default=None)
    seg.add_argument("--backend", choices=("synthetic", "remote"), default="synthetic")
    seg.add_argument("--remote-url", default=None)
    seg.add_argument("--presets", default=None)
    seg.set_defaults(func=cmd_eval_seg)

    phantom = sub.add_parser("phantom", help="render a phantom scene to .nii")
    phantom.add_argument("--scene", required=True)
    phantom.add_argument("--out", required=True)
    phantom.add_argument("--gt-dir", default=None)
    phantom.set_defaults(func=cmd_phantom)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LimisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
