"""Sentence encoders behind a tiny common interface: encode(texts) -> array.

Two families are supported. ``hash:<dims>`` is a self-contained signed
feature-hashing encoder (no weights to download, fully deterministic), useful
for offline runs and tests. Any other model name is treated as a pretrained
sentence-transformers identifier and loaded lazily, so the dependency stays
optional.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np

_HASH_NAME_RE = re.compile(r"^hash:(\d+)$")


class EncoderError(Exception):
    """The requested encoder cannot be loaded or cannot encode."""


@dataclass(frozen=True)
class HashingEncoder:
    """Signed feature hashing over whitespace tokens, L2-normalized rows.

    Each token is hashed with BLAKE2b (stable across processes and platforms,
    unlike the builtin salted hash); the low bits pick a bucket and one high
    bit picks the sign, which keeps collisions from biasing counts upward.
    """

    dims: int

    def __post_init__(self):
        if self.dims < 1:
            raise EncoderError(f"hash encoder needs dims >= 1, got {self.dims}")

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dims), dtype=np.float64)
        for row, text in enumerate(texts):
            for token in text.split():
                digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
                value = int.from_bytes(digest, "big")
                bucket = value % self.dims
                sign = 1.0 if (value >> 63) & 1 == 0 else -1.0
                out[row, bucket] += sign
        norms = np.linalg.norm(out, axis=1)
        nonzero = norms > 0
        out[nonzero] /= norms[nonzero, None]
        return out


class SentenceTransformerEncoder:
    """Thin adapter around a pretrained sentence-transformers model."""

    def __init__(self, model_name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderError(
                f"model {model_name!r} needs the sentence-transformers package "
                "(install the 'transformers' extra), or use a hash:<dims> encoder"
            ) from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise EncoderError(f"could not load model {model_name!r}: {exc}") from exc

    def encode(self, texts: list[str]) -> np.ndarray:
        return np.asarray(self._model.encode(texts), dtype=np.float64)


def load_encoder(model_name: str):
    """Build the encoder named by model_name; EncoderError when unavailable."""
    match = _HASH_NAME_RE.match(model_name)
    if match:
        return HashingEncoder(dims=int(match.group(1)))
    return SentenceTransformerEncoder(model_name)
