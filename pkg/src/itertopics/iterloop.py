"""The iterative protocol: cluster, set outliers aside, re-cluster, compare, stop.

Iteration 0 clusters the full corpus. Every following iteration drops the
previous outlier group from the universe, requests step_k fewer topics than
the previous iteration achieved, and compares the two successive partitions
on their common universe. The loop stops when the chosen index crosses
epsilon (Converged), the iteration budget runs out (MaxIters), or the data
cannot support another round (Degenerate).

The final topic set is the collection of set-aside outlier groups, one topic
per iteration, plus the last iteration's topics and its own outlier group.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

from .clusterer import ClusterParams, Partition, cluster, write_partition_csv
from .cmpindex import ComparisonReport, compare
from .errors import DegenerateRun, TooFewPoints, UniverseTooSmall
from .fileio import dump_json
from .textprep import Document
from .topicrep import TopicRep, build_reps, merge_vectors, write_topics_json
from .vectorize import (
    EmbeddingMatrix,
    SparseMatrix,
    Vocabulary,
    build_vocabulary,
    reduce_svd,
)


class StopMetric(Enum):
    VDM = "vdm"
    NVI = "nvi"
    ARI = "ari"


class StopReason(Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class RunConfig:
    initial_n: int | None = None
    step_k: int = 1
    epsilon: float = 0.02
    stop_metric: StopMetric = StopMetric.VDM
    stop_on_delta: bool = False
    max_iters: int = 20
    cluster_params: ClusterParams = field(default_factory=ClusterParams)
    seed: int = 0
    reembed: bool = False

    def __post_init__(self):
        if self.initial_n is not None and self.initial_n < 1:
            raise ValueError("initial_n must be >= 1")
        if self.step_k < 1:
            raise ValueError("step_k must be >= 1")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must be in [0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class IterationRecord:
    t: int
    requested_n: int | None
    partition: Partition
    reps: tuple[TopicRep, ...]
    outlier_ids: frozenset[str]
    vs_previous: ComparisonReport | None

    def __post_init__(self):
        if self.t == 0 and self.vs_previous is not None:
            raise ValueError("iteration 0 has nothing to compare against")

    @property
    def achieved_topics(self) -> int:
        return self.partition.n_topics

    @property
    def achieved_groups(self) -> int:
        return self.partition.n_groups

    @property
    def outlier_count(self) -> int:
        return len(self.outlier_ids)


@dataclass(frozen=True)
class RunResult:
    records: tuple[IterationRecord, ...]
    final: Partition
    final_topics: tuple[TopicRep, ...]
    stop_reason: StopReason
    stop_detail: str = ""


def _min_points(params: ClusterParams) -> int:
    return max(2 * params.min_cluster_size, params.effective_min_samples + 1)


def _make_record(
    t: int,
    requested_n: int | None,
    part: Partition,
    docs: Sequence[Document],
    vocab: Vocabulary,
    vs_previous: ComparisonReport | None,
) -> IterationRecord:
    reps = build_reps(part, docs, vocab)
    return IterationRecord(
        t=t,
        requested_n=requested_n,
        partition=part,
        reps=tuple(reps),
        outlier_ids=part.outlier_ids(),
        vs_previous=vs_previous,
    )


def run_iteration_zero(
    docs: Sequence[Document],
    emb: EmbeddingMatrix,
    cfg: RunConfig,
    vocab: Vocabulary | None = None,
) -> IterationRecord:
    """Cluster the full corpus; initial_n (when set) caps the topic count."""
    if len(docs) < _min_points(cfg.cluster_params):
        raise UniverseTooSmall(
            f"{len(docs)} documents cannot support min_cluster_size="
            f"{cfg.cluster_params.min_cluster_size}"
        )
    vocab = vocab if vocab is not None else build_vocabulary(docs)
    params = replace(cfg.cluster_params, target_n=cfg.initial_n)
    part = cluster(emb, params, reps_for=lambda p: merge_vectors(build_reps(p, docs, vocab)))
    return _make_record(0, cfg.initial_n, part, docs, vocab, None)


def next_iteration(
    prev: IterationRecord,
    docs: Sequence[Document],
    emb: EmbeddingMatrix,
    cfg: RunConfig,
    vocab: Vocabulary | None = None,
    matrix: SparseMatrix | None = None,
) -> IterationRecord:
    """Drop prev's outliers, request step_k fewer topics, compare with prev.

    docs and emb are the ORIGINAL corpus-wide inputs; rows are restricted
    here. Embeddings are reused as-is unless cfg.reembed is set and the
    TF-IDF matrix is provided, in which case the reduction is re-run on the
    restricted rows.
    """
    requested = prev.achieved_topics - cfg.step_k
    if requested < 1:
        raise DegenerateRun(
            f"iteration {prev.t} achieved {prev.achieved_topics} topics; "
            f"requesting {requested} is meaningless"
        )
    keep = [doc_id for doc_id in emb.doc_ids if doc_id in prev.partition.universe
            and doc_id not in prev.outlier_ids]
    if len(keep) < _min_points(cfg.cluster_params):
        raise UniverseTooSmall(
            f"{len(keep)} documents left after removing outliers; need "
            f"{_min_points(cfg.cluster_params)}"
        )
    vocab = vocab if vocab is not None else build_vocabulary(docs)
    keep_set = set(keep)
    sub_docs = [d for d in docs if d.id in keep_set]
    if cfg.reembed and matrix is not None:
        sub = matrix.restrict(keep)
        d = min(emb.d, sub.n_rows, sub.n_cols)
        sub_emb = reduce_svd(sub, d, cfg.seed)
    else:
        sub_emb = emb.restrict(keep)
    params = replace(cfg.cluster_params, target_n=requested)
    part = cluster(
        sub_emb, params, reps_for=lambda p: merge_vectors(build_reps(p, sub_docs, vocab))
    )
    report = compare(prev.partition, part)
    return _make_record(prev.t + 1, requested, part, sub_docs, vocab, report)


def _metric_value(report: ComparisonReport, metric: StopMetric) -> float:
    if metric is StopMetric.VDM:
        return report.vdm
    if metric is StopMetric.NVI:
        return report.nvi
    return 1.0 - report.ari


def should_stop(
    report: ComparisonReport,
    cfg: RunConfig,
    prev_report: ComparisonReport | None = None,
) -> tuple[bool, str]:
    """Value mode: stop when the index is within epsilon of perfect agreement.

    Delta mode (stop_on_delta) instead stops when the index moved by at most
    epsilon since the previous comparison, so it needs two reports.
    """
    value = _metric_value(report, cfg.stop_metric)
    name = cfg.stop_metric.value if cfg.stop_metric is not StopMetric.ARI else "1-ari"
    if cfg.stop_on_delta:
        if prev_report is None:
            return False, "delta mode needs two comparisons"
        delta = abs(value - _metric_value(prev_report, cfg.stop_metric))
        if delta <= cfg.epsilon:
            return True, f"|delta {name}|={delta:.6g} <= epsilon={cfg.epsilon:.6g}"
        return False, f"|delta {name}|={delta:.6g} > epsilon={cfg.epsilon:.6g}"
    if value <= cfg.epsilon:
        return True, f"{name}={value:.6g} <= epsilon={cfg.epsilon:.6g}"
    return False, f"{name}={value:.6g} > epsilon={cfg.epsilon:.6g}"


def assemble_final(
    records: Sequence[IterationRecord],
    docs: Sequence[Document],
    vocab: Vocabulary | None = None,
) -> tuple[Partition, tuple[TopicRep, ...]]:
    """Combine set-aside outlier groups with the last iteration's clustering.

    The last iteration's topics keep labels 0..T-1 (named topic:<j>) and its
    own outlier group stays -1; each earlier iteration t contributes its
    set-aside outlier group as topic T+i, named outlier@<t>. Representations
    are recomputed over the final grouping on the full corpus.
    """
    if not records:
        raise ValueError("need at least one iteration record")
    vocab = vocab if vocab is not None else build_vocabulary(docs)
    last = records[-1]
    assignment = dict(last.partition.assignment)
    names: dict[int, str] = {lab: f"topic:{lab}" for lab in range(last.achieved_topics)}
    if last.outlier_count:
        names[-1] = f"outlier@{last.t}"
    next_label = last.achieved_topics
    for rec in records[:-1]:
        if not rec.outlier_ids:
            continue
        for doc_id in rec.outlier_ids:
            assignment[doc_id] = next_label
        names[next_label] = f"outlier@{rec.t}"
        next_label += 1
    final = Partition(assignment)
    reps = build_reps(final, docs, vocab)
    return final, tuple(rep.named(names[rep.label]) for rep in reps)


def run(
    docs: Sequence[Document],
    emb: EmbeddingMatrix,
    cfg: RunConfig,
    matrix: SparseMatrix | None = None,
) -> RunResult:
    """Execute the whole protocol; deterministic given inputs and seed.

    Runs iteration 0 and then up to max_iters further iterations. Degenerate
    conditions stop the loop without discarding the records accumulated so
    far. The final partition always covers every input document exactly once.
    """
    if not docs:
        return RunResult(
            records=(),
            final=Partition({}),
            final_topics=(),
            stop_reason=StopReason.DEGENERATE,
            stop_detail="no documents",
        )
    vocab = build_vocabulary(docs)
    records: list[IterationRecord] = []
    stop_reason = StopReason.MAX_ITERS
    stop_detail = f"no convergence within max_iters={cfg.max_iters}"
    try:
        records.append(run_iteration_zero(docs, emb, cfg, vocab=vocab))
        prev_report: ComparisonReport | None = None
        for _ in range(cfg.max_iters):
            rec = next_iteration(records[-1], docs, emb, cfg, vocab=vocab, matrix=matrix)
            records.append(rec)
            stop, detail = should_stop(rec.vs_previous, cfg, prev_report)
            prev_report = rec.vs_previous
            if stop:
                stop_reason, stop_detail = StopReason.CONVERGED, detail
                break
    except (UniverseTooSmall, DegenerateRun, TooFewPoints) as exc:
        stop_reason, stop_detail = StopReason.DEGENERATE, str(exc)

    if records:
        final, final_topics = assemble_final(records, docs, vocab=vocab)
    else:
        final = Partition({d.id: -1 for d in docs})
        final_topics = ()
    return RunResult(
        records=tuple(records),
        final=final,
        final_topics=final_topics,
        stop_reason=stop_reason,
        stop_detail=stop_detail,
    )


def summary_rows(result: RunResult) -> list[dict]:
    """One row per iteration, mirroring the run's headline table."""
    return [
        {
            "iter": rec.t,
            "requested_n": rec.requested_n,
            "achieved_topics": rec.achieved_topics,
            "achieved_groups": rec.achieved_groups,
            "outlier_count": rec.outlier_count,
        }
        for rec in result.records
    ]


def index_rows(result: RunResult) -> list[dict]:
    """One row per successive-iteration comparison."""
    rows = []
    for rec in result.records:
        if rec.vs_previous is None:
            continue
        row: dict = {"from_iter": rec.t - 1, "to_iter": rec.t}
        row.update(rec.vs_previous.to_dict())
        rows.append(row)
    return rows


def write_run_dir(result: RunResult, outdir: str | Path, top_k: int = 10) -> None:
    """Write the run directory: per-iteration outputs, tables, final assembly."""
    outdir = Path(outdir)
    for rec in result.records:
        it_dir = outdir / f"iter_{rec.t}"
        write_partition_csv(it_dir / "assignments.csv", rec.partition)
        write_topics_json(it_dir / "topics.json", rec.reps, top_k=top_k)
    dump_json(outdir / "summary.json", summary_rows(result))
    dump_json(outdir / "indices.json", index_rows(result))
    dump_json(
        outdir / "meta.json",
        {
            "stop_reason": result.stop_reason.value,
            "stop_detail": result.stop_detail,
            "iterations": len(result.records),
            "final_topics": len(result.final_topics),
        },
    )
    write_partition_csv(outdir / "final" / "assignments.csv", result.final)
    write_topics_json(outdir / "final" / "topics.json", result.final_topics, top_k=top_k)
