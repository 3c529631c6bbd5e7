"""Language-driven interactive CT segmentation engine."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    BBox,
    BinMask,
    Click,
    HuImage,
    LabelVocabulary,
    ProbMask,
    WindowSpec,
    DEFAULT_VOCABULARY,
    ORGAN_LABELS,
    clamp_box,
)
