"""Typed interaction commands and the text grammar that produces them.

The grammar is keyword/synonym based and fully deterministic: input is
lowercased, whitespace-collapsed, stripped of trailing punctuation, then
matched against ordered regular expressions. render() emits the canonical
phrase for any command and parse(render(cmd)) == cmd for every command.
The full phrase inventory lives in docs/commands.md (served to UIs).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .core import LabelVocabulary, DEFAULT_VOCABULARY
from .errors import AmbiguousLabel, ParseError


class StrategyName(str, Enum):
    WRONG_PART = "wrong part"
    OVERSEGMENTED = "oversegmented"
    UNDERSEGMENTED = "undersegmented"
    LOW_HU = "low hu"


@dataclass(frozen=True)
class SegmentTarget:
    label: str


@dataclass(frozen=True)
class ApplyDefault:
    pass


@dataclass(frozen=True)
class AcceptStep:
    pass


@dataclass(frozen=True)
class RevertTo:
    step_id: int


@dataclass(frozen=True)
class SelectFinal:
    step_id: int


@dataclass(frozen=True)
class ShiftBox:
    dx: int
    dy: int


@dataclass(frozen=True)
class ResizeBox:
    """Per-edge outward deltas; negative values shrink."""

    left: int
    top: int
    right: int
    bottom: int

    @classmethod
    def uniform(cls, d: int) -> "ResizeBox":
        return cls(d, d, d, d)

    @property
    def is_uniform(self) -> bool:
        return self.left == self.top == self.right == self.bottom


@dataclass(frozen=True)
class SetThreshold:
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")


@dataclass(frozen=True)
class GridClick:
    cell: int  # 0..15 row-major over the 4x4 grid on the current crop
    positive: bool

    def __post_init__(self):
        if not 0 <= self.cell <= 15:
            raise ValueError("grid cell must lie in 0..15")


@dataclass(frozen=True)
class CenterClick:
    pass


@dataclass(frozen=True)
class SetWindow:
    """Either a named preset or an explicit center/width pair."""

    preset: str | None = None
    center: float | None = None
    width: float | None = None

    def __post_init__(self):
        named = self.preset is not None
        numeric = self.center is not None and self.width is not None
        if named == numeric:
            raise ValueError("window takes a preset name or center+width")
        if numeric and self.width <= 0:
            raise ValueError("window width must be positive")


@dataclass(frozen=True)
class RemoveComponent:
    ordinal: int  # 1-based, largest component first

    def __post_init__(self):
        if self.ordinal < 1:
            raise ValueError("component ordinal is 1-based")


@dataclass(frozen=True)
class Ensemble:
    pass


@dataclass(frozen=True)
class GenerateExamples:
    pass


@dataclass(frozen=True)
class ProposeCriticalPoints:
    pass


@dataclass(frozen=True)
class ResolveCriticalPoint:
    index: int  # 0-based into the last proposal
    positive: bool

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("critical point index must be >= 0")


@dataclass(frozen=True)
class StartStrategy:
    name: StrategyName


@dataclass(frozen=True)
class NextStrategyStep:
    pass


@dataclass(frozen=True)
class Help:
    pass


InteractionCommand = (
    SegmentTarget | ApplyDefault | AcceptStep | RevertTo | SelectFinal
    | ShiftBox | ResizeBox | SetThreshold | GridClick | CenterClick
    | SetWindow | RemoveComponent | Ensemble | GenerateExamples
    | ProposeCriticalPoints | ResolveCriticalPoint | StartStrategy
    | NextStrategyStep | Help
)

_NUM = r"(-?\d+(?:\.\d+)?(?:e-?\d+)?)"
_INT = r"(-?\d+)"
_UNIT = r"(?:\s*(?:px|pixels?|hu))?"
_FG = r"(foreground|background|fg|bg|positive|negative|pos|neg)"


def _is_positive(word: str) -> bool:
    return word in ("foreground", "fg", "positive", "pos")


def _cell_index(token: str) -> int:
    if re.fullmatch(r"[a-d][1-4]", token):
        return (ord(token[0]) - ord("a")) * 4 + int(token[1]) - 1
    value = int(token)
    if not 0 <= value <= 15:
        raise ParseError(f"grid cell {value} outside 0..15",
                         suggestions=["grid click"])
    return value


def _parse_tau(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise ParseError(f"threshold {value} outside [0, 1]",
                         suggestions=["set threshold"])
    return value


_STRATEGY_PATTERNS: list[tuple[str, StrategyName]] = [
    (r"(?:the )?wrong (?:image )?(?:part|region|structure)(?: (?:was |is )?segmented)?",
     StrategyName.WRONG_PART),
    (r"(?:the )?(?:target |mask )?(?:is |was )?over ?segmented", StrategyName.OVERSEGMENTED),
    (r"(?:the )?(?:target |mask )?(?:is |was )?under ?segmented", StrategyName.UNDERSEGMENTED),
    (r"(?:the )?(?:target |mask )?(?:is |looks )?too (?:large|big)", StrategyName.OVERSEGMENTED),
    (r"(?:the )?(?:target |mask )?(?:is |looks )?too small", StrategyName.UNDERSEGMENTED),
    (r"(?:the )?target has low hu(?:[ -]?values?)?", StrategyName.LOW_HU),
    (r"low (?:hu(?:[ -]?values?)?|attenuation|density)", StrategyName.LOW_HU),
]


def _match_strategy(text: str) -> StrategyName | None:
    for pattern, name in _STRATEGY_PATTERNS:
        if re.fullmatch(pattern, text):
            return name
    return None


def _resolve_label(fragment: str, vocab: LabelVocabulary) -> str:
    candidates = vocab.match_prefix(fragment)
    if len(candidates) == 1:
        return candidates[0]
    if len(candidates) > 1:
        raise AmbiguousLabel(fragment, candidates)
    near = [lab for lab in vocab if _edit_distance(fragment, lab) <= 2]
    raise ParseError(f"unknown organ label '{fragment}'", suggestions=near)


def _edit_distance(a: str, b: str) -> int:
    if abs(len(a) - len(b)) > 2:
        return 3
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


_DIRECTIONS = {"left": (-1, 0), "right": (1, 0), "up": (0, -1), "down": (0, 1)}


def normalize(text: str) -> str:
    text = text.strip().lower()
    text = re.sub(r"[.!?,;:]+$", "", text)
    text = re.sub(r"\s+", " ", text)
    return text.strip()


def parse(text: str, vocab: LabelVocabulary = DEFAULT_VOCABULARY) -> InteractionCommand:
    """Parse free text into a typed command.

    Raises ParseError (with nearest-intent suggestions) or AmbiguousLabel.
    """
    if not text or not text.strip():
        raise ParseError("empty command", suggestions=["help"])
    t = normalize(text)

    if re.fullmatch(r"help|commands|\?", t):
        return Help()
    if re.fullmatch(r"accept(?: (?:step|it|this))?|keep(?: (?:it|this|the mask))?|yes|looks good", t):
        return AcceptStep()
    if re.fullmatch(r"next(?: step)?|continue|go on|proceed", t):
        return NextStrategyStep()
    if re.fullmatch(r"(?:apply )?(?:the )?default(?: (?:adaptation|step|options?))?", t):
        return ApplyDefault()
    if re.fullmatch(r"ensemble|combine(?: the)?(?: masks)?", t):
        return Ensemble()
    if re.fullmatch(r"(?:show |generate )?examples?|show exemplary interactions", t):
        return GenerateExamples()
    if re.fullmatch(r"(?:propose |show |suggest )?critical points?", t):
        return ProposeCriticalPoints()
    if re.fullmatch(r"(?:center|centre) click|click(?: the)? (?:center|centre|middle)", t):
        return CenterClick()

    m = re.fullmatch(rf"(?:revert|undo|go back)(?: to)?(?: step)? {_INT}", t)
    if m:
        step = int(m.group(1))
        if step < 0:
            raise ParseError("step ids are non-negative", suggestions=["revert"])
        return RevertTo(step)

    m = re.fullmatch(
        rf"(?:final(?:ize)?|select final)(?: step)? {_INT}"
        rf"|(?:select|mark|choose|use) step {_INT} as final",
        t,
    )
    if m:
        step = int(m.group(1) or m.group(2))
        if step < 0:
            raise ParseError("step ids are non-negative", suggestions=["final"])
        return SelectFinal(step)

    m = re.fullmatch(r"(?:segment|find|detect)(?: the)? (.+)", t)
    if m:
        return SegmentTarget(_resolve_label(m.group(1), vocab))

    m = re.fullmatch(rf"(?:shift|move)(?: the)? box {_INT}{_UNIT} {_INT}{_UNIT}", t)
    if m:
        return ShiftBox(int(m.group(1)), int(m.group(2)))
    m = re.fullmatch(
        rf"(?:shift|move)(?: the)? box (left|right|up|down) (\d+){_UNIT}"
        rf"(?: (left|right|up|down) (\d+){_UNIT})?",
        t,
    )
    if m:
        dx, dy = 0, 0
        for d_word, d_amount in ((m.group(1), m.group(2)), (m.group(3), m.group(4))):
            if d_word:
                ux, uy = _DIRECTIONS[d_word]
                dx += ux * int(d_amount)
                dy += uy * int(d_amount)
        return ShiftBox(dx, dy)

    m = re.fullmatch(rf"(?:expand|grow|enlarge)(?: the)? box(?: by)? (\d+){_UNIT}", t)
    if m:
        return ResizeBox.uniform(int(m.group(1)))
    m = re.fullmatch(rf"(?:shrink|reduce)(?: the)? box(?: by)? (\d+){_UNIT}", t)
    if m:
        return ResizeBox.uniform(-int(m.group(1)))
    m = re.fullmatch(
        rf"resize(?: the)? box left {_INT}{_UNIT} top {_INT}{_UNIT}"
        rf" right {_INT}{_UNIT} bottom {_INT}{_UNIT}",
        t,
    )
    if m:
        return ResizeBox(int(m.group(1)), int(m.group(2)), int(m.group(3)), int(m.group(4)))

    m = re.fullmatch(
        rf"(?:set )?(?:confidence |foreground )?threshold(?: to)? {_NUM}"
        rf"|(?:confidence|tau) {_NUM}",
        t,
    )
    if m:
        return SetThreshold(_parse_tau(m.group(1) or m.group(2)))

    m = re.fullmatch(rf"(?:grid )?click (?:cell |grid )?(\d+|[a-d][1-4]) {_FG}", t)
    if m:
        return GridClick(_cell_index(m.group(1)), _is_positive(m.group(2)))

    m = re.fullmatch(rf"(?:set |use |choose )?window(?: to)? {_NUM}{_UNIT} {_NUM}{_UNIT}", t)
    if m:
        width = float(m.group(2))
        if width <= 0:
            raise ParseError("window width must be positive", suggestions=["window"])
        return SetWindow(center=float(m.group(1)), width=width)
    m = re.fullmatch(r"(?:set |use |choose )?window(?: to)? ([a-z][a-z ]*)"
                     r"|use ([a-z][a-z ]*) window", t)
    if m:
        return SetWindow(preset=(m.group(1) or m.group(2)).strip())

    m = re.fullmatch(r"(?:remove|delete|drop) component (\d+)", t)
    if m:
        ordinal = int(m.group(1))
        if ordinal < 1:
            raise ParseError("component ordinals start at 1", suggestions=["remove component"])
        return RemoveComponent(ordinal)

    m = re.fullmatch(rf"(?:critical )?point (\d+)(?: is)? {_FG}", t)
    if m:
        return ResolveCriticalPoint(int(m.group(1)), _is_positive(m.group(2)))

    m = re.fullmatch(r"(?:start |run )?strategy (.+)", t)
    if m:
        name = _match_strategy(m.group(1)) or _match_strategy("the target is " + m.group(1))
        if name is None:
            raise ParseError(
                f"unknown strategy '{m.group(1)}'",
                suggestions=[s.value for s in StrategyName],
            )
        return StartStrategy(name)
    name = _match_strategy(t)
    if name is not None:
        return StartStrategy(name)

    raise ParseError(f"could not understand '{text.strip()}'",
                     suggestions=_suggest(t))


_INTENT_KEYWORDS: dict[str, str] = {
    "segment": "segment <organ>", "find": "segment <organ>", "detect": "segment <organ>",
    "default": "apply default", "apply": "apply default",
    "accept": "accept", "keep": "accept",
    "revert": "revert to step <n>", "undo": "revert to step <n>",
    "final": "final step <n>", "finalize": "final step <n>",
    "shift": "shift box <dx> <dy>", "move": "shift box <dx> <dy>",
    "expand": "expand box <d>", "grow": "expand box <d>", "enlarge": "expand box <d>",
    "shrink": "shrink box <d>", "reduce": "shrink box <d>", "resize": "resize box ...",
    "box": "shift box <dx> <dy>",
    "threshold": "threshold <tau>", "confidence": "threshold <tau>", "tau": "threshold <tau>",
    "click": "click cell <0-15> foreground|background",
    "cell": "click cell <0-15> foreground|background",
    "grid": "click cell <0-15> foreground|background",
    "center": "center click", "centre": "center click",
    "window": "window <preset> | window <center> <width>",
    "remove": "remove component <n>", "delete": "remove component <n>",
    "component": "remove component <n>",
    "ensemble": "ensemble", "combine": "ensemble",
    "examples": "show examples", "show": "show examples",
    "critical": "critical points", "points": "critical points", "point": "point <i> foreground",
    "strategy": "start strategy <name>", "start": "start strategy <name>",
    "next": "next", "continue": "next",
    "help": "help", "commands": "help",
    "oversegmented": "start strategy oversegmented",
    "undersegmented": "start strategy undersegmented",
    "wrong": "start strategy wrong part",
    "low": "start strategy low hu",
}


def _suggest(normalized: str) -> list[str]:
    tokens = normalized.split()
    hits: list[str] = []
    for token in tokens:
        for keyword, intent in _INTENT_KEYWORDS.items():
            if _edit_distance(token, keyword) <= 2 and intent not in hits:
                hits.append(intent)
    return hits


def render(cmd: InteractionCommand) -> str:
    """Canonical phrase for a command; parse(render(cmd)) == cmd."""
    match cmd:
        case SegmentTarget(label):
            return f"segment the {label}"
        case ApplyDefault():
            return "apply default"
        case AcceptStep():
            return "accept"
        case RevertTo(step_id):
            return f"revert to step {step_id}"
        case SelectFinal(step_id):
            return f"final step {step_id}"
        case ShiftBox(dx, dy):
            return f"shift box {dx} {dy}"
        case ResizeBox(left, top, right, bottom):
            if cmd.is_uniform and left >= 0:
                return f"expand box {left}"
            if cmd.is_uniform:
                return f"shrink box {-left}"
            return f"resize box left {left} top {top} right {right} bottom {bottom}"
        case SetThreshold(tau):
            return f"threshold {tau!r}"
        case GridClick(cell, positive):
            return f"click cell {cell} {'foreground' if positive else 'background'}"
        case CenterClick():
            return "center click"
        case SetWindow(preset, center, width):
            if preset is not None:
                return f"window {preset}"
            return f"window {center!r} {width!r}"
        case RemoveComponent(ordinal):
            return f"remove component {ordinal}"
        case Ensemble():
            return "ensemble"
        case GenerateExamples():
            return "show examples"
        case ProposeCriticalPoints():
            return "critical points"
        case ResolveCriticalPoint(index, positive):
            return f"point {index} {'foreground' if positive else 'background'}"
        case StartStrategy(name):
            return f"start strategy {name.value}"
        case NextStrategyStep():
            return "next"
        case Help():
            return "help"
    raise TypeError(f"not a command: {cmd!r}")


def help_text() -> str:
    """The grammar reference document shipped with the package."""
    return resources.files("limis").joinpath("data/commands.md").read_text()
