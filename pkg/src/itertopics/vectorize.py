"""Vectorization: vocabulary, TF-IDF, seeded randomized SVD, external embeddings.

Two routes to an EmbeddingMatrix: the built-in TF-IDF + truncated SVD path,
or a CSV of externally produced embeddings aligned to the document ids.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy import sparse

from .errors import (
    DimensionMismatch,
    DimensionTooLarge,
    DuplicateId,
    EmptyVocabulary,
    ExtraId,
    MissingId,
    ParseError,
)
from .fileio import atomic_write_text
from .textprep import Document


@dataclass(frozen=True)
class Vocabulary:
    """Retained terms in lexicographic order with their document frequencies."""

    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]
    n_docs: int

    def __post_init__(self):
        if len(self.terms) != len(self.doc_freq):
            raise ValueError("terms and doc_freq must align")
        if list(self.terms) != sorted(self.terms):
            raise ValueError("terms must be sorted")

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}


@dataclass(frozen=True)
class SparseMatrix:
    """Row-aligned sparse document-term matrix (CSR inside)."""

    doc_ids: tuple[str, ...]
    matrix: sparse.csr_matrix

    def __post_init__(self):
        if len(self.doc_ids) != self.matrix.shape[0]:
            raise ValueError("doc_ids must match row count")

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    def entries(self) -> Iterator[tuple[int, int, float]]:
        """Yield (row, col, weight) triples of the stored nonzeros."""
        coo = self.matrix.tocoo()
        yield from zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())

    def restrict(self, ids: Sequence[str]) -> "SparseMatrix":
        """Rows for the given ids, in the given order."""
        pos = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}
        try:
            idx = [pos[doc_id] for doc_id in ids]
        except KeyError as exc:
            raise MissingId(exc.args[0]) from exc
        return SparseMatrix(doc_ids=tuple(ids), matrix=self.matrix[idx])


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Dense n x d matrix with one row per document id."""

    doc_ids: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self):
        if self.rows.ndim != 2 or len(self.doc_ids) != self.rows.shape[0]:
            raise ValueError("doc_ids must match row count")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValueError("doc_ids must be unique")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("all entries must be finite")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def restrict(self, ids: Sequence[str]) -> "EmbeddingMatrix":
        """Rows for the given ids, in the given order."""
        pos = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}
        try:
            idx = [pos[doc_id] for doc_id in ids]
        except KeyError as exc:
            raise MissingId(exc.args[0]) from exc
        return EmbeddingMatrix(doc_ids=tuple(ids), rows=self.rows[idx].copy())


def tokenize(text: str) -> list[str]:
    return text.split()


def build_vocabulary(docs: Sequence[Document], min_df: int = 1, max_df_ratio: float = 1.0) -> Vocabulary:
    """Collect terms with min_df <= document frequency <= max_df_ratio * n.

    Raises EmptyVocabulary when every term is filtered out.
    """
    if not docs:
        raise ValueError("docs must be nonempty")
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    if not 0.0 < max_df_ratio <= 1.0:
        raise ValueError("max_df_ratio must be in (0, 1]")
    df: dict[str, int] = {}
    for doc in docs:
        for term in set(tokenize(doc.clean)):
            df[term] = df.get(term, 0) + 1
    n = len(docs)
    kept = sorted(t for t, c in df.items() if c >= min_df and c <= max_df_ratio * n)
    if not kept:
        raise EmptyVocabulary("no term survives the document-frequency filters")
    return Vocabulary(terms=tuple(kept), doc_freq=tuple(df[t] for t in kept), n_docs=n)


def tfidf_matrix(docs: Sequence[Document], vocab: Vocabulary) -> SparseMatrix:
    """Smoothed TF-IDF: tf(r,t) * ln((1+n)/(1+df(t))); nonzero rows L2-normalized.

    n is the corpus size; df comes from the vocabulary, which must have been
    built on the same corpus. Documents without retained terms give zero rows.
    """
    n = len(docs)
    idf = np.log((1.0 + n) / (1.0 + np.asarray(vocab.doc_freq, dtype=np.float64)))
    index = vocab.index
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for r, doc in enumerate(docs):
        counts: dict[int, int] = {}
        for term in tokenize(doc.clean):
            c = index.get(term)
            if c is not None:
                counts[c] = counts.get(c, 0) + 1
        if not counts:
            continue
        weights = {c: tf * idf[c] for c, tf in counts.items()}
        norm = math.sqrt(sum(w * w for w in weights.values()))
        if norm == 0.0:
            continue
        for c in sorted(weights):
            rows.append(r)
            cols.append(c)
            vals.append(weights[c] / norm)
    matrix = sparse.csr_matrix(
        (np.asarray(vals), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(n, len(vocab)),
    )
    return SparseMatrix(doc_ids=tuple(d.id for d in docs), matrix=matrix)


def reduce_svd(m: SparseMatrix, d: int, seed: int) -> EmbeddingMatrix:
    """Project rows onto the top-d right singular vectors.

    Randomized range finder: seeded Gaussian test matrix with oversampling,
    four power iterations with QR re-orthonormalization, then an exact SVD of
    the small projected matrix. Deterministic for a fixed seed.
    """
    n, n_cols = m.n_rows, m.n_cols
    if d < 1:
        raise ValueError("d must be >= 1")
    if d > min(n, n_cols):
        raise DimensionTooLarge(f"d={d} exceeds min(n_rows, n_cols)={min(n, n_cols)}")
    a = m.matrix
    rng = np.random.default_rng(seed)
    # Sketch width: a generous floor makes modest problems exact (the sketch
    # spans the full min-dimension, so the projected SVD is the true SVD);
    # d + 8 keeps a safety margin on instances too large for that.
    sketch = min(max(d + 8, 64), min(n, n_cols))
    omega = rng.standard_normal((n_cols, sketch))
    q, _ = np.linalg.qr(a @ omega)
    for _ in range(4):
        z, _ = np.linalg.qr(a.T @ q)
        q, _ = np.linalg.qr(a @ z)
    b = (a.T @ q).T
    _, _, vt = np.linalg.svd(b, full_matrices=False)
    v = vt[:d].T
    # Fix each direction's sign so the largest-magnitude entry is positive.
    for j in range(d):
        k = int(np.argmax(np.abs(v[:, j])))
        if v[k, j] < 0:
            v[:, j] = -v[:, j]
    rows = np.asarray(a @ v, dtype=np.float64)
    return EmbeddingMatrix(doc_ids=m.doc_ids, rows=rows)


def reconstruction_error(m: SparseMatrix, emb: EmbeddingMatrix) -> float:
    """Frobenius error of the rank-d projection: sqrt(|A|_F^2 - |AV|_F^2)."""
    a_sq = float((m.matrix.multiply(m.matrix)).sum())
    p_sq = float(np.sum(emb.rows * emb.rows))
    return math.sqrt(max(a_sq - p_sq, 0.0))


_HEADER_COL_RE = re.compile(r"^e(\d+)$")


def load_external_embeddings(path: str | Path, expected_ids: Sequence[str]) -> EmbeddingMatrix:
    """Read an embeddings CSV and align its rows to expected_ids order.

    Header must be id,e0,...,e{d-1}. Raises ParseError (with a line number)
    for malformed content, DuplicateId / MissingId / ExtraId for id-set
    mismatches, and DimensionMismatch for ragged rows.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty embeddings file", line=1) from None
        if not header or header[0] != "id":
            raise ParseError("header must start with 'id'", line=1)
        dim = len(header) - 1
        if dim < 1:
            raise ParseError("no embedding columns", line=1)
        for j, name in enumerate(header[1:]):
            match = _HEADER_COL_RE.match(name)
            if not match or int(match.group(1)) != j:
                raise ParseError(f"expected column e{j}, got {name!r}", line=1)

        by_id: dict[str, np.ndarray] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise DimensionMismatch(
                    f"line {line_no}: expected {dim} values, got {len(row) - 1}"
                )
            doc_id = row[0]
            if doc_id in by_id:
                raise DuplicateId(doc_id)
            try:
                by_id[doc_id] = np.array([float(x) for x in row[1:]], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"bad float: {exc}", line=line_no) from exc

    expected = list(expected_ids)
    expected_set = set(expected)
    for doc_id in expected:
        if doc_id not in by_id:
            raise MissingId(doc_id)
    for doc_id in by_id:
        if doc_id not in expected_set:
            raise ExtraId(doc_id)
    rows = np.stack([by_id[doc_id] for doc_id in expected]) if expected else np.zeros((0, dim))
    return EmbeddingMatrix(doc_ids=tuple(expected), rows=rows)


def write_embeddings_csv(path: str | Path, emb: EmbeddingMatrix) -> None:
    """Write the embeddings CSV: id,e0,...,e{d-1}; 9 significant digits."""
    lines = ["id," + ",".join(f"e{j}" for j in range(emb.d))]
    for doc_id, row in zip(emb.doc_ids, emb.rows):
        lines.append(doc_id + "," + ",".join(f"{x:.9g}" for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")
