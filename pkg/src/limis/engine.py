"""Interactive session engine: detector-to-segmenter initialization, the
default adaptation, manual refinement commands, guided multi-step
strategies, critical-point proposals, and a fully revertible step tree.

Every step is derived deterministically from its parent's state plus an op
descriptor, so replaying an exported session against the same backend
reproduces every mask bit-exactly. Steps are immutable once appended; the
cursor only moves on accept/revert. One session is single-writer; callers
that share a session across threads must serialize commands themselves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import commands as cm
from .backends import Detection, SegmentPrompt
from .core import BBox, BinMask, Click, HuImage, ProbMask, WindowSpec, clamp_box, expand_box, shift_box
from .core import DEFAULT_VOCABULARY
from .errors import (
    EmptyBox,
    EngineError,
    NoDetection,
    ScriptExhausted,
    StaleProposal,
    UnknownComponent,
    UnknownStep,
)
from .imaging import DEFAULT_PRESETS, WindowPresets, crop_with_margin, paste_mask, window_normalize
from .maskops import connected_components, dice, majority_ensemble, rle_encode, threshold


@dataclass(frozen=True)
class SessionConfig:
    """Engine defaults; every value is overridable per session."""

    default_tau: float = 0.5
    initial_margin_px: int = 0
    default_margin_px: int = 10   # the default adaptation's box enlargement
    strategy_tau_step: float = 0.1
    strategy_box_step_px: int = 10
    ensemble_box_step_px: int = 10
    eps_critical: float = 0.05
    critical_k: int = 5
    critical_min_dist_px: float = 10.0


DEFAULT_CONFIG = SessionConfig()


@dataclass(frozen=True)
class CriticalPoint:
    """Pixel whose foreground probability sits near the threshold."""

    x: int
    y: int
    ambiguity: float  # |p - tau|


@dataclass(frozen=True)
class StepState:
    """Full prompt + result state of one step. Immutable."""

    box: BBox                 # working box, image coords
    clicks: tuple[Click, ...]  # image coords
    window: WindowSpec
    tau: float
    margin_px: int
    crop_box: BBox            # clamp(expand(box, margin)); prob lives here
    prob: ProbMask            # crop coords
    mask: BinMask             # image coords (pasted back)


@dataclass
class SessionStep:
    id: int
    parent_id: int | None
    state: StepState
    op: dict
    accepted: bool = False


@dataclass
class StrategyScript:
    name: cm.StrategyName
    templates: tuple[tuple, ...]
    cursor: int = 0

    @property
    def remaining(self) -> int:
        return len(self.templates) - self.cursor


_STRATEGY_TEMPLATES: dict[cm.StrategyName, tuple[tuple, ...]] = {
    # add center click, adjust normalization, then confirmable grid points
    # at the four center cells (foreground)
    cm.StrategyName.WRONG_PART: (
        ("center_click",), ("set_window_organ",),
        ("grid_click", 5, True), ("grid_click", 6, True),
        ("grid_click", 9, True), ("grid_click", 10, True),
    ),
    # raise the threshold, then critical points, then background grid
    # points at the four corner cells
    cm.StrategyName.OVERSEGMENTED: (
        ("tau_delta", 1), ("propose_critical",),
        ("grid_click", 0, False), ("grid_click", 3, False),
        ("grid_click", 12, False), ("grid_click", 15, False),
    ),
    # enlarge the box, lower the threshold, then critical points
    cm.StrategyName.UNDERSEGMENTED: (
        ("box_grow",), ("tau_delta", -1), ("propose_critical",),
    ),
    # re-normalize for low-attenuation targets
    cm.StrategyName.LOW_HU: (
        ("set_window_low_hu",),
    ),
}


@dataclass
class CommandOutcome:
    """What one command did: a new step, a proposal, previews, or text."""

    kind: str
    step: SessionStep | None = None
    critical_points: list[CriticalPoint] | None = None
    previews: list[dict] | None = None
    help_text: str | None = None
    strategy: cm.StrategyName | None = None
    strategy_remaining: int | None = None
    cursor: int = 0
    final: int | None = None


class Session:
    """One image, one target structure, one revertible interaction history."""

    def __init__(self, session_id: str, image: HuImage, image_ref: str,
                 target_label: str, backend, presets: WindowPresets,
                 config: SessionConfig, gt: BinMask | None):
        self.id = session_id
        self.image = image
        self.image_ref = image_ref
        self.target_label = target_label
        self.backend = backend
        self.presets = presets
        self.config = config
        self.gt = gt
        self.steps: list[SessionStep] = []
        self.cursor: int = 0
        self.final: int | None = None
        self.detections: list[Detection] = []
        self.dice_log: list[float] | None = [] if gt is not None else None
        self.active_script: StrategyScript | None = None
        self._proposal: tuple[int, tuple[CriticalPoint, ...]] | None = None

    # -- step plumbing ----------------------------------------------------

    def step_by_id(self, step_id: int) -> SessionStep:
        if not 0 <= step_id < len(self.steps):
            raise UnknownStep(f"no step {step_id}")
        return self.steps[step_id]

    @property
    def cursor_step(self) -> SessionStep:
        return self.steps[self.cursor]

    def _append(self, state: StepState, op: dict, parent_id: int | None) -> SessionStep:
        expected = paste_mask(threshold(state.prob, state.tau),
                              (state.crop_box.x0, state.crop_box.y0),
                              self.image.width, self.image.height)
        if expected != state.mask:
            raise AssertionError("step violates mask == threshold(prob, tau) at offset")
        step = SessionStep(id=len(self.steps), parent_id=parent_id, state=state, op=op)
        self.steps.append(step)
        if self.dice_log is not None:
            self.dice_log.append(dice(state.mask, self.gt))
        return step

    # -- state derivation (shared by live commands and replay) -------------

    def _segment_state(self, box: BBox, clicks: tuple[Click, ...],
                       window: WindowSpec, tau: float, margin: int) -> StepState:
        crop_box = clamp_box(expand_box(box, margin), self.image.width, self.image.height)
        crop, offset = crop_with_margin(self.image, box, margin)
        norm = window_normalize(crop, window)
        crop_clicks = tuple(
            Click(c.x - offset[0], c.y - offset[1], c.positive)
            for c in clicks
            if crop_box.x0 <= c.x < crop_box.x1 and crop_box.y0 <= c.y < crop_box.y1
        )
        prompt = SegmentPrompt(
            pixels=norm,
            box=BBox(0, 0, crop_box.width, crop_box.height),
            clicks=crop_clicks,
            window=window,
        )
        prob = self.backend.segment(prompt)
        mask = paste_mask(threshold(prob, tau), offset, self.image.width, self.image.height)
        return StepState(box=box, clicks=clicks, window=window, tau=tau,
                         margin_px=margin, crop_box=crop_box, prob=prob, mask=mask)

    def _empty_state(self, box: BBox, window: WindowSpec, tau: float, margin: int) -> StepState:
        crop_box = clamp_box(expand_box(box, margin), self.image.width, self.image.height)
        prob = ProbMask(np.zeros((crop_box.height, crop_box.width), dtype=np.float32))
        return StepState(box=box, clicks=(), window=window, tau=tau, margin_px=margin,
                         crop_box=crop_box, prob=prob,
                         mask=BinMask.empty(self.image.width, self.image.height))

    def _grid_cell_click(self, state: StepState, cell: int, positive: bool) -> Click:
        crop = state.crop_box
        i, j = cell % 4, cell // 4
        x = crop.x0 + (2 * i + 1) * crop.width // 8
        y = crop.y0 + (2 * j + 1) * crop.height // 8
        return Click(x, y, positive)

    def execute_op(self, parent: StepState | None, op: dict) -> StepState:
        """Derive a step state from its parent and an op descriptor.

        Pure with a deterministic backend: replaying an exported op list
        reproduces every state bit-exactly.
        """
        kind = op["kind"]
        cfg = self.config
        if kind == "create":
            window = self.presets.default
            if op.get("box") is None:
                w, h = self.image.width, self.image.height
                placeable = BBox(w // 4, h // 4, w // 4 + max(w // 2, 1), h // 4 + max(h // 2, 1))
                return self._empty_state(placeable, window, cfg.default_tau, cfg.initial_margin_px)
            box = BBox(*op["box"])
            return self._segment_state(box, (), window, cfg.default_tau, cfg.initial_margin_px)
        if parent is None:
            raise EngineError(f"op '{kind}' requires a parent step")
        if kind == "segment_target":
            box = BBox(*op["box"])
            return self._segment_state(box, (), parent.window, parent.tau, parent.margin_px)
        if kind == "apply_default":
            window = self.presets.for_organ(self.target_label)
            return self._segment_state(parent.box, parent.clicks, window,
                                       parent.tau, cfg.default_margin_px)
        if kind == "shift_box":
            box = clamp_box(shift_box(parent.box, int(op["dx"]), int(op["dy"])),
                            self.image.width, self.image.height)
            return self._segment_state(box, parent.clicks, parent.window,
                                       parent.tau, parent.margin_px)
        if kind == "resize_box":
            grown = expand_box(parent.box, int(op["left"]), int(op["top"]),
                               int(op["right"]), int(op["bottom"]))
            box = clamp_box(grown, self.image.width, self.image.height)
            return self._segment_state(box, parent.clicks, parent.window,
                                       parent.tau, parent.margin_px)
        if kind == "set_threshold":
            tau = float(op["tau"])
            mask = paste_mask(threshold(parent.prob, tau),
                              (parent.crop_box.x0, parent.crop_box.y0),
                              self.image.width, self.image.height)
            return replace(parent, tau=tau, mask=mask)
        if kind == "grid_click":
            click = self._grid_cell_click(parent, int(op["cell"]), bool(op["positive"]))
            return self._segment_state(parent.box, parent.clicks + (click,),
                                       parent.window, parent.tau, parent.margin_px)
        if kind == "center_click":
            cx, cy = parent.box.center()
            click = Click(cx, cy, True)
            return self._segment_state(parent.box, parent.clicks + (click,),
                                       parent.window, parent.tau, parent.margin_px)
        if kind == "resolve_critical":
            click = Click(int(op["x"]), int(op["y"]), bool(op["positive"]))
            return self._segment_state(parent.box, parent.clicks + (click,),
                                       parent.window, parent.tau, parent.margin_px)
        if kind == "set_window":
            window = WindowSpec(center=float(op["center"]), width=float(op["width"]))
            return self._segment_state(parent.box, parent.clicks, window,
                                       parent.tau, parent.margin_px)
        if kind == "remove_component":
            comps = connected_components(parent.mask)
            ordinal = int(op["ordinal"])
            if not any(c.id == ordinal for c in comps.components):
                raise UnknownComponent(
                    f"component {ordinal} does not exist ({len(comps)} present)")
            member = comps.labels == ordinal
            crop = parent.crop_box
            member_crop = member[crop.y0:crop.y1, crop.x0:crop.x1]
            prob = parent.prob.data.copy()
            prob[member_crop] = 0.0
            prob_mask = ProbMask(prob)
            mask = paste_mask(threshold(prob_mask, parent.tau),
                              (crop.x0, crop.y0), self.image.width, self.image.height)
            return replace(parent, prob=prob_mask, mask=mask)
        if kind == "ensemble":
            members = [
                {"kind": "resize_box",
                 "left": self.config.ensemble_box_step_px,
                 "top": self.config.ensemble_box_step_px,
                 "right": self.config.ensemble_box_step_px,
                 "bottom": self.config.ensemble_box_step_px},
                {"kind": "center_click"},
                {"kind": "set_window",
                 "center": self.presets.for_organ(self.target_label).center,
                 "width": self.presets.for_organ(self.target_label).width},
            ]
            masks = [self.execute_op(parent, m).mask for m in members]
            combined = majority_ensemble(masks)
            crop_box = clamp_box(
                expand_box(parent.box, parent.margin_px + self.config.ensemble_box_step_px),
                self.image.width, self.image.height)
            crop_view = combined.data[crop_box.y0:crop_box.y1, crop_box.x0:crop_box.x1]
            prob = ProbMask(crop_view.astype(np.float32))
            mask = paste_mask(threshold(prob, 0.5), (crop_box.x0, crop_box.y0),
                              self.image.width, self.image.height)
            return StepState(box=parent.box, clicks=parent.clicks, window=parent.window,
                             tau=0.5, margin_px=parent.margin_px, crop_box=crop_box,
                             prob=prob, mask=mask)
        raise EngineError(f"unknown op kind '{kind}'")

    # -- session mutations --------------------------------------------------

    def accept(self) -> SessionStep:
        children = [s for s in self.steps if s.parent_id == self.cursor]
        if not children:
            raise EngineError("no pending step to accept")
        newest = max(children, key=lambda s: s.id)
        newest.accepted = True
        self.cursor = newest.id
        self._proposal = None  # proposals die with the cursor position
        return newest

    def revert_to(self, step_id: int) -> SessionStep:
        step = self.step_by_id(step_id)
        self.cursor = step.id
        self._proposal = None
        return step

    def select_final(self, step_id: int) -> SessionStep:
        step = self.step_by_id(step_id)
        self.final = step.id
        return step

    # -- queries --------------------------------------------------------------

    def propose_critical_points(self, k: int | None = None) -> list[CriticalPoint]:
        cfg = self.config
        k = cfg.critical_k if k is None else k
        state = self.cursor_step.state
        amb = np.abs(state.prob.data - np.float32(state.tau))
        ys, xs = np.nonzero(amb <= cfg.eps_critical + 1e-9)
        order = sorted(range(len(xs)), key=lambda i: (float(amb[ys[i], xs[i]]), int(ys[i]), int(xs[i])))
        chosen: list[CriticalPoint] = []
        for i in order:
            if len(chosen) >= k:
                break
            px = int(xs[i]) + state.crop_box.x0
            py = int(ys[i]) + state.crop_box.y0
            if all((px - p.x) ** 2 + (py - p.y) ** 2 >= cfg.critical_min_dist_px ** 2
                   for p in chosen):
                chosen.append(CriticalPoint(x=px, y=py, ambiguity=float(amb[ys[i], xs[i]])))
        self._proposal = (self.cursor, tuple(chosen))
        return chosen

    def resolve_critical_point(self, index: int, positive: bool) -> SessionStep:
        if self._proposal is None or self._proposal[0] != self.cursor:
            raise StaleProposal("critical points were proposed for a different step")
        points = self._proposal[1]
        if not 0 <= index < len(points):
            raise EngineError(f"no critical point {index} in the last proposal")
        point = points[index]
        op = {"kind": "resolve_critical", "x": point.x, "y": point.y, "positive": positive}
        state = self.execute_op(self.cursor_step.state, op)
        return self._append(state, op, self.cursor)

    def generate_examples(self) -> list[dict]:
        """Non-mutating previews, one per manual adaptation."""
        parent = self.cursor_step.state
        organ_window = self.presets.for_organ(self.target_label)
        candidates: list[tuple[str, dict | None]] = [
            ("shift box 5 0", {"kind": "shift_box", "dx": 5, "dy": 0}),
            ("expand box 10", {"kind": "resize_box", "left": 10, "top": 10,
                               "right": 10, "bottom": 10}),
            (f"threshold {min(parent.tau + self.config.strategy_tau_step, 1.0):g}",
             {"kind": "set_threshold",
              "tau": min(parent.tau + self.config.strategy_tau_step, 1.0)}),
            ("click cell 5 foreground", {"kind": "grid_click", "cell": 5, "positive": True}),
            ("center click", {"kind": "center_click"}),
            (f"window {self.presets.organ_preset_name(self.target_label)}",
             {"kind": "set_window", "center": organ_window.center,
              "width": organ_window.width}),
            ("remove component 1", {"kind": "remove_component", "ordinal": 1}),
            ("ensemble", {"kind": "ensemble"}),
        ]
        previews = []
        for phrase, op in candidates:
            try:
                state = self.execute_op(parent, op)
            except (EngineError, EmptyBox):
                continue
            previews.append({"command": phrase, "op": op["kind"],
                             "mask_rle": rle_encode(state.mask)})
        points = [
            {"x": p.x, "y": p.y, "ambiguity": p.ambiguity}
            for p in self._preview_critical_points()
        ]
        previews.append({"command": "critical points", "op": "propose_critical_points",
                         "critical_points": points})
        return previews

    def _preview_critical_points(self) -> list[CriticalPoint]:
        saved = self._proposal
        points = self.propose_critical_points()
        self._proposal = saved
        return points

    # -- strategies -------------------------------------------------------------

    def start_strategy(self, name: cm.StrategyName) -> CommandOutcome:
        self.active_script = StrategyScript(name=name, templates=_STRATEGY_TEMPLATES[name])
        return self.run_strategy_step()

    def run_strategy_step(self) -> CommandOutcome:
        script = self.active_script
        if script is None:
            raise EngineError("no active strategy; start one first")
        if script.remaining == 0:
            raise ScriptExhausted(f"strategy '{script.name.value}' is complete")
        template = script.templates[script.cursor]
        script.cursor += 1
        parent = self.cursor_step.state
        cfg = self.config
        tag = template[0]
        if tag == "propose_critical":
            points = self.propose_critical_points()
            return CommandOutcome(kind="propose_critical_points",
                                  critical_points=points,
                                  strategy=script.name,
                                  strategy_remaining=script.remaining,
                                  cursor=self.cursor, final=self.final)
        if tag == "tau_delta":
            tau = min(max(parent.tau + template[1] * cfg.strategy_tau_step, 0.0), 1.0)
            op = {"kind": "set_threshold", "tau": tau}
        elif tag == "box_grow":
            d = cfg.strategy_box_step_px
            op = {"kind": "resize_box", "left": d, "top": d, "right": d, "bottom": d}
        elif tag == "center_click":
            op = {"kind": "center_click"}
        elif tag == "grid_click":
            op = {"kind": "grid_click", "cell": template[1], "positive": template[2]}
        elif tag == "set_window_organ":
            w = self.presets.for_organ(self.target_label)
            op = {"kind": "set_window", "center": w.center, "width": w.width,
                  "preset": self.presets.organ_preset_name(self.target_label)}
        elif tag == "set_window_low_hu":
            w = self.presets.low_hu
            op = {"kind": "set_window", "center": w.center, "width": w.width,
                  "preset": self.presets.low_hu_name}
        else:
            raise EngineError(f"unknown strategy template '{tag}'")
        state = self.execute_op(parent, op)
        step = self._append(state, op, self.cursor)
        return CommandOutcome(kind=op["kind"], step=step, strategy=script.name,
                              strategy_remaining=script.remaining,
                              cursor=self.cursor, final=self.final)

    # -- command dispatch ----------------------------------------------------------

    def apply_command(self, cmd: cm.InteractionCommand) -> CommandOutcome:
        out = self._dispatch(cmd)
        out.cursor = self.cursor
        out.final = self.final
        return out

    def _dispatch(self, cmd: cm.InteractionCommand) -> CommandOutcome:
        match cmd:
            case cm.SegmentTarget(label):
                if label != self.target_label:
                    raise EngineError(
                        f"session is bound to '{self.target_label}'; "
                        f"start a new session to segment '{label}'")
                detections = self.backend.detect(self.image.data, [label])
                if not detections:
                    raise NoDetection(f"no detection for '{label}'")
                self.detections = detections
                op = {"kind": "segment_target", "box": list(detections[0].box.as_tuple())}
                step = self._append(self.execute_op(self.cursor_step.state, op), op, self.cursor)
                return CommandOutcome(kind=op["kind"], step=step)
            case cm.ApplyDefault():
                op = {"kind": "apply_default"}
            case cm.AcceptStep():
                step = self.accept()
                return CommandOutcome(kind="accept", step=step)
            case cm.RevertTo(step_id):
                step = self.revert_to(step_id)
                return CommandOutcome(kind="revert", step=step)
            case cm.SelectFinal(step_id):
                step = self.select_final(step_id)
                return CommandOutcome(kind="select_final", step=step)
            case cm.ShiftBox(dx, dy):
                op = {"kind": "shift_box", "dx": dx, "dy": dy}
            case cm.ResizeBox(left, top, right, bottom):
                op = {"kind": "resize_box", "left": left, "top": top,
                      "right": right, "bottom": bottom}
            case cm.SetThreshold(tau):
                op = {"kind": "set_threshold", "tau": tau}
            case cm.GridClick(cell, positive):
                op = {"kind": "grid_click", "cell": cell, "positive": positive}
            case cm.CenterClick():
                op = {"kind": "center_click"}
            case cm.SetWindow(preset, center, width):
                if preset is not None:
                    w = self.presets.get(preset)
                    op = {"kind": "set_window", "center": w.center, "width": w.width,
                          "preset": preset}
                else:
                    op = {"kind": "set_window", "center": center, "width": width}
            case cm.RemoveComponent(ordinal):
                op = {"kind": "remove_component", "ordinal": ordinal}
            case cm.Ensemble():
                op = {"kind": "ensemble"}
            case cm.GenerateExamples():
                return CommandOutcome(kind="generate_examples", previews=self.generate_examples())
            case cm.ProposeCriticalPoints():
                return CommandOutcome(kind="propose_critical_points",
                                      critical_points=self.propose_critical_points())
            case cm.ResolveCriticalPoint(index, positive):
                step = self.resolve_critical_point(index, positive)
                return CommandOutcome(kind="resolve_critical", step=step)
            case cm.StartStrategy(name):
                return self.start_strategy(name)
            case cm.NextStrategyStep():
                return self.run_strategy_step()
            case cm.Help():
                return CommandOutcome(kind="help", help_text=cm.help_text())
            case _:
                raise EngineError(f"unsupported command {cmd!r}")
        step = self._append(self.execute_op(self.cursor_step.state, op), op, self.cursor)
        return CommandOutcome(kind=op["kind"], step=step)

    # -- export / replay ----------------------------------------------------------------

    def export(self) -> dict:
        steps = []
        for s in self.steps:
            doc = {
                "id": s.id,
                "parent": s.parent_id,
                "op": s.op["kind"],
                "params": {k: v for k, v in s.op.items() if k != "kind"},
                "tau": s.state.tau,
                "window": {"center": s.state.window.center, "width": s.state.window.width},
                "box": list(s.state.box.as_tuple()),
                "margin": s.state.margin_px,
                "clicks": [{"x": c.x, "y": c.y, "positive": c.positive}
                           for c in s.state.clicks],
                "mask_rle": rle_encode(s.state.mask),
                "accepted": s.accepted,
            }
            if self.dice_log is not None:
                doc["dice"] = self.dice_log[s.id]
            steps.append(doc)
        return {
            "session": self.id,
            "image": self.image_ref,
            "target": self.target_label,
            "steps": steps,
            "cursor": self.cursor,
            "final": self.final,
        }

    def export_json(self) -> str:
        return json.dumps(self.export(), sort_keys=True, separators=(",", ":"))


def create_session(image: HuImage, target_label: str, backend, *,
                   presets: WindowPresets = DEFAULT_PRESETS,
                   config: SessionConfig = DEFAULT_CONFIG,
                   gt: BinMask | None = None,
                   session_id: str = "s0",
                   image_ref: str = "",
                   initial_box: BBox | None = None,
                   vocab=DEFAULT_VOCABULARY) -> Session:
    """Run language-to-box-to-mask initialization and record step 0.

    When the detector finds nothing (and no initial_box is given) the
    session starts with an empty mask and a centered user-placeable box.
    initial_box bypasses detection; evaluation harnesses use it to study
    specific box placements.
    """
    vocab.require(target_label)
    session = Session(session_id, image, image_ref, target_label, backend,
                      presets, config, gt)
    box: BBox | None = initial_box
    if box is None:
        session.detections = backend.detect(image.data, [target_label])
        if session.detections:
            box = session.detections[0].box
    op = {"kind": "create", "label": target_label,
          "box": list(box.as_tuple()) if box is not None else None}
    state = session.execute_op(None, op)
    session._append(state, op, None)
    return session


def apply_default(session: Session) -> SessionStep:
    """Organ-specific window plus the default box enlargement, as one step."""
    op = {"kind": "apply_default"}
    state = session.execute_op(session.cursor_step.state, op)
    return session._append(state, op, session.cursor)


def replay(export: dict, image: HuImage, backend, *,
           presets: WindowPresets = DEFAULT_PRESETS,
           config: SessionConfig = DEFAULT_CONFIG,
           gt: BinMask | None = None) -> Session:
    """Rebuild a session from its export by re-executing every op against
    its recorded parent. With a deterministic backend the masks must match
    the exported RLEs bit-exactly (verified by callers/tests)."""
    session = Session(export["session"], image, export["image"], export["target"],
                      backend, presets, config, gt)
    for doc in sorted(export["steps"], key=lambda d: d["id"]):
        op = {"kind": doc["op"], **doc["params"]}
        parent_id = doc["parent"]
        parent = session.steps[parent_id].state if parent_id is not None else None
        state = session.execute_op(parent, op)
        step = session._append(state, op, parent_id)
        step.accepted = bool(doc.get("accepted", False))
    session.cursor = export["cursor"]
    session.final = export.get("final")
    return session
