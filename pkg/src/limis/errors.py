"""Exception types shared across the package."""


class LimisError(Exception):
    """Base class for all package-specific errors."""


class EmptyBox(LimisError):
    """A box operation produced a region with no pixels."""


class BadMagic(LimisError):
    """Input bytes are not a single-file NIfTI-1 volume."""


class UnsupportedDatatype(LimisError):
    """NIfTI datatype code outside the supported subset (int16, float32)."""


class UnsupportedDims(LimisError):
    """NIfTI dim[0] is not 3."""


class TruncatedFile(LimisError):
    """Voxel data (or the header itself) is shorter than declared."""


class OverlapError(LimisError):
    """Two phantom shapes with the same label overlap on a slice."""


class IndexOutOfRange(LimisError, IndexError):
    """Slice index outside the volume."""


class EmptyForeground(LimisError):
    """Foreground mask for statistics is empty."""


class DimensionMismatch(LimisError):
    """Masks with different dimensions were combined."""


class UnknownComponent(LimisError):
    """Referenced connected component does not exist."""


class UnknownLabel(LimisError):
    """Label not in the organ vocabulary."""


class ParseError(LimisError):
    """Free text did not match any command.

    Carries suggestions: intent names whose keywords are within edit
    distance 2 of some input token.
    """

    def __init__(self, message: str, suggestions: list[str] | None = None):
        super().__init__(message)
        self.message = message
        self.suggestions = suggestions or []


class AmbiguousLabel(ParseError):
    """A label fragment matched more than one vocabulary entry."""

    def __init__(self, fragment: str, candidates: list[str]):
        super().__init__(
            f"label '{fragment}' is ambiguous: {', '.join(candidates)}",
            suggestions=list(candidates),
        )
        self.fragment = fragment
        self.candidates = list(candidates)


class BackendUnavailable(LimisError):
    """Remote inference endpoint unreachable, timed out, or answered non-200."""


class EngineError(LimisError):
    """Command is valid but cannot be applied to the current session state."""


class UnknownStep(LimisError):
    """Referenced step id does not exist in the session."""


class StaleProposal(EngineError):
    """Critical-point proposal no longer matches the session cursor."""


class ScriptExhausted(EngineError):
    """The active strategy script has no templates left."""


class UnknownPreset(EngineError):
    """Window preset name not present in the preset table."""


class NoDetection(EngineError):
    """Detector returned nothing for the requested label (mid-session)."""


class MissingGroundTruth(LimisError):
    """Operation requires ground truth the session does not carry."""


class TooManyNegatives(LimisError):
    """Requested more negative labels than the vocabulary can supply."""


class EmptyCorpus(LimisError):
    """Evaluation corpus contains no cases."""
