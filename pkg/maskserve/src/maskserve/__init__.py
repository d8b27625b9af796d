"""Masked-LM scoring service: full-vocab mask distributions over HTTP."""

from .app import create_app
from .model import MaskedLMBackend, ModelHandle, build_tiny_model

__version__ = "0.1.0"

__all__ = ["MaskedLMBackend", "ModelHandle", "build_tiny_model", "create_app", "__version__"]
