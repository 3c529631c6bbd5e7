"""Regenerate the frontend test fixtures from the real engine.

Builds a 5-step session with one branch (step 4 adapts non-latest step 1),
a selected final step, and ground truth attached, then writes the export
JSON, every step's mask PNG, and the Dice trajectory.

Run from the repo root: python3 frontend/scripts/make_fixtures.py
"""

import json
from pathlib import Path

from limis.backends import SyntheticBackend
from limis.commands import parse
from limis.engine import create_session
from limis.maskops import mask_to_png
from limis.metrics import dice_trajectory
from limis.volume_io import PhantomScene, PhantomShape, render_phantom, slice_transversal

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def build_session():
    scene = PhantomScene(
        dims=(64, 64, 1),
        shapes=(
            PhantomShape("ellipse", "liver", center=(32.0, 30.0),
                         size=(12.0, 10.0), mean_hu=60.0),
        ),
    )
    volume, gt = render_phantom(scene)
    image = slice_transversal(volume, 0)
    session = create_session(image, "liver", SyntheticBackend(),
                             gt=gt.mask_for(0, "liver"),
                             session_id="fixture-session",
                             image_ref="fixture-image#z0")
    for text in ["apply default", "accept", "threshold 0.6", "accept",
                 "click cell 5 foreground", "revert to step 1",
                 "expand box 5", "accept", "final step 2"]:
        session.apply_command(parse(text))
    return session


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    session = build_session()
    export = session.export()
    assert len(export["steps"]) >= 5
    assert any(s["parent"] != s["id"] - 1 for s in export["steps"][1:]), "need a branch"
    (OUT / "session.json").write_text(json.dumps(export, indent=2, sort_keys=True))
    for step in session.steps:
        (OUT / f"step{step.id}.png").write_bytes(mask_to_png(step.state.mask))
    (OUT / "trajectory.json").write_text(
        json.dumps(dice_trajectory(export), indent=2, sort_keys=True))
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
