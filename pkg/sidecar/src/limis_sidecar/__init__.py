"""Inference sidecar speaking the limis detector/segmenter wire protocol."""

__version__ = "0.1.0"

from .app import StubModels, create_app  # noqa: F401
