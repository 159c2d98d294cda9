"""Iterative topic modelling: cluster, set outliers aside, re-cluster, converge."""

__version__ = "0.1.0"

from .clusterer import ClusterParams, Partition, Selection, cluster
from .cmpindex import ComparisonReport, compare
from .iterloop import IterationRecord, RunConfig, RunResult, StopMetric, StopReason, run
from .textprep import CleanConfig, Document, RawRecord, Rejected, clean_document
from .topicrep import TopicRep, build_reps
from .vectorize import (
    EmbeddingMatrix,
    SparseMatrix,
    Vocabulary,
    build_vocabulary,
    load_external_embeddings,
    reduce_svd,
    tfidf_matrix,
    write_embeddings_csv,
)

__all__ = [
    "__version__",
    "ClusterParams",
    "Partition",
    "Selection",
    "cluster",
    "ComparisonReport",
    "compare",
    "IterationRecord",
    "RunConfig",
    "RunResult",
    "StopMetric",
    "StopReason",
    "run",
    "CleanConfig",
    "Document",
    "RawRecord",
    "Rejected",
    "clean_document",
    "TopicRep",
    "build_reps",
    "EmbeddingMatrix",
    "SparseMatrix",
    "Vocabulary",
    "build_vocabulary",
    "load_external_embeddings",
    "reduce_svd",
    "tfidf_matrix",
    "write_embeddings_csv",
]
