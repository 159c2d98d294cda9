"""Deterministic cleaning pipeline turning raw short texts into analysis-ready documents.

Cleaning order: URLs -> emoji -> mentions/hyphen-tokens/punctuation/whitespace
-> lowercase, then length and English filters decide whether a record is kept.
All rules are pure string functions, safe to apply in parallel.
"""
from __future__ import annotations

import csv
import io
import json
import re
import string
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import DuplicateId, ParseError
from .fileio import atomic_write_text

# Stripped emoji code points: U+1F000-U+1FAFF (the SMP emoji blocks),
# U+2600-U+27BF (misc symbols / dingbats), plus the variation selector
# U+FE0F and zero-width joiner U+200D used in emoji sequences.
_EMOJI_RE = re.compile("[\U0001F000-\U0001FAFF☀-➿️‍]")

# A URL starts at "http://", "https://" or "www." and runs to the next whitespace.
_URL_RE = re.compile(r"(?:https?://|www\.)\S*")

_WS_RE = re.compile(r"\s+")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)

# 50 high-frequency English function words; one hit marks a text as English.
ENGLISH_MARKERS = frozenset(
    """
    the a an and or but if then is are was were be been to of in on at by
    for with from as that this these those it its he she they we you i not
    which do does did have has had will would can could there what
    """.split()
)


class RejectReason(Enum):
    TOO_SHORT = "TooShort"
    NOT_ENGLISH = "NotEnglish"


@dataclass(frozen=True)
class RawRecord:
    """One input row: opaque id plus raw UTF-8 text."""

    id: str
    text: str


@dataclass(frozen=True)
class Document:
    """A retained document: id, raw text and its cleaned form."""

    id: str
    raw: str
    clean: str


@dataclass(frozen=True)
class Rejected:
    """Normal outcome for records that fail the cleaning filters."""

    id: str
    reason: RejectReason


@dataclass(frozen=True)
class CleanConfig:
    min_chars: int = 15
    english_filter: bool = True

    def __post_init__(self):
        if self.min_chars < 0:
            raise ValueError("min_chars must be >= 0")


def strip_emojis(text: str) -> str:
    """Delete emoji code points; everything else is preserved in order."""
    return _EMOJI_RE.sub("", text)


def strip_urls(text: str) -> str:
    """Replace each URL token with a single space."""
    return _URL_RE.sub(" ", text)


def strip_noise(text: str) -> str:
    """Drop @-mentions and hyphen-prefixed tokens, strip punctuation, tidy spaces."""
    tokens = [t for t in text.split() if not t.startswith(("@", "-"))]
    cleaned = " ".join(tokens).translate(_PUNCT_TABLE)
    return _WS_RE.sub(" ", cleaned).strip()


def is_english(text: str) -> bool:
    """Heuristic: >= 90% ASCII characters and at least one English marker word.

    Expects already-lowercased text; empty text is not English.
    """
    if not text:
        return False
    ascii_count = sum(1 for ch in text if ord(ch) < 128)
    if ascii_count / len(text) < 0.9:
        return False
    return any(tok in ENGLISH_MARKERS for tok in text.split())


def clean_document(rec: RawRecord, cfg: CleanConfig = CleanConfig()) -> Document | Rejected:
    """Run the full cleaning pipeline on one record.

    Returns a Document, or Rejected(TooShort | NotEnglish) when the cleaned
    text fails the config thresholds.
    """
    if not rec.id:
        raise ValueError("record id must be nonempty")
    text = strip_urls(rec.text)
    text = strip_emojis(text)
    text = strip_noise(text)
    text = text.lower()
    if len(text) < cfg.min_chars:
        return Rejected(rec.id, RejectReason.TOO_SHORT)
    if cfg.english_filter and not is_english(text):
        return Rejected(rec.id, RejectReason.NOT_ENGLISH)
    return Document(id=rec.id, raw=rec.text, clean=text)


def read_raw_csv(path: str | Path, id_col: str = "id", text_col: str = "text") -> list[RawRecord]:
    """Read raw records from a CSV with a header row.

    Raises ParseError for undecodable bytes (with a line number), a missing
    header column, or an empty id; DuplicateId when ids repeat.
    """
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = raw[: exc.start].count(b"\n") + 1
        raise ParseError("invalid UTF-8", line=line) from exc

    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ParseError("empty file", line=1)
    for col in (id_col, text_col):
        if col not in reader.fieldnames:
            raise ParseError(f"missing column {col!r}", line=1)

    records: list[RawRecord] = []
    seen: set[str] = set()
    for row in reader:
        rec_id = row[id_col]
        if rec_id is None or rec_id == "":
            raise ParseError("empty id", line=reader.line_num)
        if rec_id in seen:
            raise DuplicateId(rec_id)
        seen.add(rec_id)
        records.append(RawRecord(id=rec_id, text=row[text_col] or ""))
    return records


def write_documents_jsonl(path: str | Path, docs: list[Document]) -> None:
    """Write cleaned documents as JSON lines: {"id", "text"}."""
    lines = [json.dumps({"id": d.id, "text": d.clean}, ensure_ascii=False) for d in docs]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def write_rejects_jsonl(path: str | Path, rejects: list[Rejected]) -> None:
    lines = [json.dumps({"id": r.id, "reason": r.reason.value}) for r in rejects]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_documents_jsonl(path: str | Path) -> list[Document]:
    """Read cleaned documents back; the stored text is both raw and clean here."""
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                doc_id, text = obj["id"], obj["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"bad document record: {exc}", line=line_no) from exc
            if doc_id in seen:
                raise DuplicateId(doc_id)
            seen.add(doc_id)
            docs.append(Document(id=doc_id, raw=text, clean=text))
    return docs
