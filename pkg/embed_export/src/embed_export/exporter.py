"""Read cleaned JSON-lines documents, encode them in batches, write the
embeddings CSV (header id,e0,...,e{d-1}; one row per document, input order)."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import load_encoder


class ExportError(Exception):
    """The export cannot produce a valid embeddings CSV."""


class MalformedInput(ExportError):
    """The cleaned-documents file is not valid JSON lines with id and text."""


@dataclass(frozen=True)
class ExportJob:
    input: str | Path
    model_name: str
    batch_size: int
    output: str | Path

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def read_cleaned_docs(path: str | Path) -> list[tuple[str, str]]:
    """(id, text) pairs in file order; MalformedInput names the bad line."""
    docs: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedInput(f"line {line_no}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise MalformedInput(f"line {line_no}: expected an object")
            doc_id = record.get("id")
            text = record.get("text")
            if not isinstance(doc_id, str) or not doc_id:
                raise MalformedInput(f"line {line_no}: missing or empty 'id'")
            if not isinstance(text, str):
                raise MalformedInput(f"line {line_no}: missing 'text'")
            if doc_id in seen:
                raise MalformedInput(f"line {line_no}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            docs.append((doc_id, text))
    return docs


def _atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def export_embeddings(job: ExportJob) -> int:
    """Encode job.input and write job.output; returns the document count.

    Raises MalformedInput / ExportError for bad input and EncoderError when
    the model cannot be loaded.
    """
    encoder = load_encoder(job.model_name)
    docs = read_cleaned_docs(job.input)
    if not docs:
        raise ExportError(f"no documents in {job.input}")

    batches: list[np.ndarray] = []
    for start in range(0, len(docs), job.batch_size):
        chunk = [text for _, text in docs[start : start + job.batch_size]]
        encoded = np.asarray(encoder.encode(chunk), dtype=np.float64)
        if encoded.ndim != 2 or encoded.shape[0] != len(chunk):
            raise ExportError(
                f"encoder returned shape {encoded.shape} for a batch of {len(chunk)}"
            )
        batches.append(encoded)
    rows = np.vstack(batches)
    if not np.all(np.isfinite(rows)):
        raise ExportError("encoder produced non-finite values")
    dims = rows.shape[1]
    if dims < 1:
        raise ExportError("encoder produced zero-dimensional vectors")

    lines = ["id," + ",".join(f"e{j}" for j in range(dims))]
    for (doc_id, _), row in zip(docs, rows):
        lines.append(doc_id + "," + ",".join(f"{x:.9g}" for x in row))
    _atomic_write_text(job.output, "\n".join(lines) + "\n")
    return len(docs)
