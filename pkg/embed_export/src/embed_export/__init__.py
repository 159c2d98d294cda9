"""Batch-encode cleaned documents into the embeddings CSV format."""
from __future__ import annotations

from .encoders import EncoderError, HashingEncoder, load_encoder
from .exporter import ExportError, ExportJob, MalformedInput, export_embeddings, read_cleaned_docs

__version__ = "0.1.0"

__all__ = [
    "EncoderError",
    "ExportError",
    "ExportJob",
    "HashingEncoder",
    "MalformedInput",
    "export_embeddings",
    "load_encoder",
    "read_cleaned_docs",
    "__version__",
]
