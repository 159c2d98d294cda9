"""Shared fixtures: a planted-topic corpus, blob embeddings, random partitions.

The planted corpus is the workhorse for pipeline-level tests: 12 topics with
disjoint 40-word vocabularies drawn from a 2000-word pool, skewed topic sizes,
plus documents of uniform pool noise. Every generator here is seeded so the
suite is reproducible run to run.
"""
from __future__ import annotations

import random

import numpy as np
import pytest

from itertopics.clusterer import ClusterParams, Partition, Selection
from itertopics.iterloop import RunConfig, StopMetric
from itertopics.textprep import Document
from itertopics.vectorize import (
    EmbeddingMatrix,
    SparseMatrix,
    Vocabulary,
    build_vocabulary,
    reduce_svd,
    tfidf_matrix,
)

PLANTED_SIZES = (70, 65, 60, 55, 50, 48, 45, 42, 38, 32, 28, 27)
PLANTED_NOISE = 40
PLANTED_POOL = 2000
WORDS_PER_TOPIC = 40
DOC_LEN = 12


def make_planted_docs(
    seed: int = 0,
    sizes: tuple[int, ...] = PLANTED_SIZES,
    n_noise: int = PLANTED_NOISE,
    marker: str | None = None,
) -> list[Document]:
    """Corpus with planted topics: each topic draws from its own 40-word slice
    of the pool; noise docs draw uniformly from the whole pool. An optional
    marker token is appended to every document (useful to satisfy the English
    filter in end-to-end CLI runs; a token present in every document carries
    zero idf weight, so it cannot influence the clustering)."""
    rng = random.Random(seed)
    pool = [f"w{i:04d}" for i in range(PLANTED_POOL)]
    slices = [pool[i * WORDS_PER_TOPIC:(i + 1) * WORDS_PER_TOPIC] for i in range(len(sizes))]
    docs: list[Document] = []
    k = 0
    for t, size in enumerate(sizes):
        for _ in range(size):
            words = [rng.choice(slices[t]) for _ in range(DOC_LEN)]
            if marker:
                words.append(marker)
            text = " ".join(words)
            docs.append(Document(id=f"d{k:04d}", raw=text, clean=text))
            k += 1
    for _ in range(n_noise):
        words = [rng.choice(pool) for _ in range(DOC_LEN)]
        if marker:
            words.append(marker)
        text = " ".join(words)
        docs.append(Document(id=f"d{k:04d}", raw=text, clean=text))
        k += 1
    return docs


def planted_csv_text(docs: list[Document]) -> str:
    lines = ["id,text"]
    lines += [f"{d.id},{d.raw}" for d in docs]
    return "\n".join(lines) + "\n"


def blob_embedding(
    seed: int,
    sizes: tuple[int, ...] = (30, 30),
    centers: np.ndarray | None = None,
    sigma: float = 0.1,
    d: int = 3,
    prefix: str = "p",
) -> EmbeddingMatrix:
    """Gaussian blobs with well-separated centers; ids p0000, p0001, ..."""
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = np.zeros((len(sizes), d))
        for i in range(len(sizes)):
            centers[i, i % d] = 10.0 * (1 + i // d)
    rows = []
    for c, size in zip(centers, sizes):
        rows.append(rng.normal(0.0, sigma, size=(size, d)) + c)
    rows = np.vstack(rows)
    ids = tuple(f"{prefix}{i:04d}" for i in range(rows.shape[0]))
    return EmbeddingMatrix(doc_ids=ids, rows=rows)


def partition_of(labels: list[int], prefix: str = "x") -> Partition:
    """Wrap a plain label list as a partition over ids x0, x1, ..."""
    return Partition({f"{prefix}{i}": lab for i, lab in enumerate(labels)})


def random_labels(rng: random.Random, n: int, allow_outliers: bool = True) -> list[int]:
    """Arbitrary label pattern: between one giant cluster and all singletons."""
    k = rng.randint(1, n)
    lo = -1 if allow_outliers and rng.random() < 0.3 else 0
    return [rng.randint(lo, k - 1) for _ in range(n)]


DEFAULT_CLUSTER_PARAMS = ClusterParams(
    min_cluster_size=8, min_samples=None, selection=Selection.LEAF, seed=42
)


def planted_run_config(**overrides) -> RunConfig:
    base = dict(
        stop_metric=StopMetric.VDM,
        epsilon=0.02,
        max_iters=20,
        step_k=1,
        cluster_params=DEFAULT_CLUSTER_PARAMS,
        seed=42,
    )
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="session")
def planted_docs() -> list[Document]:
    return make_planted_docs()


@pytest.fixture(scope="session")
def planted_vocab(planted_docs) -> Vocabulary:
    return build_vocabulary(planted_docs, min_df=1, max_df_ratio=1.0)


@pytest.fixture(scope="session")
def planted_matrix(planted_docs, planted_vocab) -> SparseMatrix:
    return tfidf_matrix(planted_docs, planted_vocab)


@pytest.fixture(scope="session")
def planted_embedding(planted_matrix) -> EmbeddingMatrix:
    return reduce_svd(planted_matrix, 5, seed=42)
