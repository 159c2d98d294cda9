"""Command-line interface: clean, embed, run, compare, report.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 degenerate run
(including MaxIters without convergence). Every non-zero exit prints a
one-line reason to stderr.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .clusterer import ClusterParams, Selection, read_partition_csv
from .cmpindex import compare
from .errors import PipelineError
from .fileio import load_json
from .iterloop import RunConfig, StopMetric, StopReason, run, write_run_dir
from .textprep import (
    CleanConfig,
    RejectReason,
    clean_document,
    Document,
    read_raw_csv,
    read_documents_jsonl,
    write_documents_jsonl,
    write_rejects_jsonl,
)
from .topicrep import read_topics_json
from .vectorize import (
    build_vocabulary,
    load_external_embeddings,
    reduce_svd,
    tfidf_matrix,
    write_embeddings_csv,
)


class DataError(click.ClickException):
    """Bad input data or file format; exits 2."""

    exit_code = 2


class PipelineGroup(click.Group):
    """Group whose usage errors exit 1 (data errors keep exit 2)."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(
                args=args,
                prog_name=prog_name,
                complete_var=complete_var,
                standalone_mode=False,
                **extra,
            )
        except click.UsageError as exc:
            click.echo(f"usage error: {exc.format_message()}", err=True)
            sys.exit(1)
        except click.ClickException as exc:
            click.echo(f"error: {exc.format_message()}", err=True)
            sys.exit(exc.exit_code)
        except click.exceptions.Abort:
            click.echo("aborted", err=True)
            sys.exit(1)
        sys.exit(rv if isinstance(rv, int) else 0)


def _parse_config_file(path: str) -> dict[str, str]:
    overrides: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise click.UsageError(f"config line {line_no}: expected key=value")
            key, _, value = line.partition("=")
            overrides[key.strip().replace("-", "_")] = value.strip()
    return overrides


@click.group(cls=PipelineGroup)
@click.version_option(version=__version__, prog_name="itertopics")
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="key=value file supplying flag defaults; explicit flags win",
)
@click.option("--threads", type=int, default=1, show_default=True,
              help="cap on inner parallelism (results never depend on it)")
@click.pass_context
def cli(ctx: click.Context, config: str | None, threads: int):
    """Iterative topic modelling pipeline."""
    if threads < 1:
        raise click.UsageError("--threads must be >= 1")
    if config is not None:
        overrides = _parse_config_file(config)
        ctx.default_map = {name: dict(overrides) for name in cli.commands}


@cli.command("clean")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--id-col", default="id", show_default=True)
@click.option("--text-col", default="text", show_default=True)
@click.option("--min-chars", default=15, show_default=True, type=int)
@click.option("--no-english-filter", is_flag=True, default=False)
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
@click.option("--rejects", "rejects_path", default=None, type=click.Path(dir_okay=False))
def cmd_clean(input_path, id_col, text_col, min_chars, no_english_filter, output_path, rejects_path):
    """Clean a raw CSV into the documents JSON-lines file."""
    try:
        cfg = CleanConfig(min_chars=min_chars, english_filter=not no_english_filter)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    try:
        records = read_raw_csv(input_path, id_col=id_col, text_col=text_col)
        kept, rejects = [], []
        for rec in records:
            result = clean_document(rec, cfg)
            if isinstance(result, Document):
                kept.append(result)
            else:
                rejects.append(result)
        write_documents_jsonl(output_path, kept)
        if rejects_path is not None:
            write_rejects_jsonl(rejects_path, rejects)
    except PipelineError as exc:
        raise DataError(str(exc)) from exc
    counts = {
        "read": len(records),
        "kept": len(kept),
        "rejected_short": sum(1 for r in rejects if r.reason is RejectReason.TOO_SHORT),
        "rejected_lang": sum(1 for r in rejects if r.reason is RejectReason.NOT_ENGLISH),
    }
    click.echo(json.dumps(counts))


@cli.command("embed")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["tfidf-svd", "external"]),
              default="tfidf-svd", show_default=True)
@click.option("--dims", default=5, show_default=True, type=int)
@click.option("--min-df", default=2, show_default=True, type=int)
@click.option("--embeddings", "embeddings_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="external embeddings CSV (required with --method external)")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
def cmd_embed(input_path, method, dims, min_df, embeddings_path, seed, output_path):
    """Produce the embeddings CSV for a cleaned corpus."""
    if method == "external" and embeddings_path is None:
        raise click.UsageError("--method external requires --embeddings")
    if dims < 1:
        raise click.UsageError("--dims must be >= 1")
    if min_df < 1:
        raise click.UsageError("--min-df must be >= 1")
    try:
        docs = read_documents_jsonl(input_path)
        ids = [d.id for d in docs]
        if method == "external":
            emb = load_external_embeddings(embeddings_path, ids)
        else:
            vocab = build_vocabulary(docs, min_df=min_df)
            emb = reduce_svd(tfidf_matrix(docs, vocab), dims, seed)
        write_embeddings_csv(output_path, emb)
    except PipelineError as exc:
        raise DataError(str(exc)) from exc
    click.echo(json.dumps({"docs": emb.n, "dims": emb.d}))


@cli.command("run")
@click.option("--docs", "docs_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--embeddings", "embeddings_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--initial-n", default=None, type=int,
              help="topic cap for iteration 0 (default: natural count)")
@click.option("--step-k", default=1, show_default=True, type=int)
@click.option("--epsilon", default=0.02, show_default=True, type=float)
@click.option("--stop-metric", type=click.Choice(["vdm", "nvi", "ari"]),
              default="vdm", show_default=True)
@click.option("--stop-on-delta", is_flag=True, default=False,
              help="stop on the change in the index instead of its value")
@click.option("--min-cluster-size", default=15, show_default=True, type=int)
@click.option("--min-samples", default=None, type=int,
              help="default: min-cluster-size")
@click.option("--selection", type=click.Choice(["eom", "leaf"]),
              default="eom", show_default=True)
@click.option("--max-iters", default=20, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--top-k", default=10, show_default=True, type=int,
              help="terms kept per topic in topics.json")
@click.option("--outdir", required=True, type=click.Path(file_okay=False))
@click.pass_context
def cmd_run(ctx, docs_path, embeddings_path, initial_n, step_k, epsilon, stop_metric,
            stop_on_delta, min_cluster_size, min_samples, selection, max_iters,
            seed, top_k, outdir):
    """Execute the iterative protocol and populate a run directory."""
    try:
        params = ClusterParams(
            min_cluster_size=min_cluster_size,
            min_samples=min_samples,
            selection=Selection(selection),
            seed=seed,
        )
        cfg = RunConfig(
            initial_n=initial_n,
            step_k=step_k,
            epsilon=epsilon,
            stop_metric=StopMetric(stop_metric),
            stop_on_delta=stop_on_delta,
            max_iters=max_iters,
            cluster_params=params,
            seed=seed,
        )
        if top_k < 1:
            raise ValueError("--top-k must be >= 1")
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    try:
        docs = read_documents_jsonl(docs_path)
        emb = load_external_embeddings(embeddings_path, [d.id for d in docs])
        result = run(docs, emb, cfg)
        write_run_dir(result, outdir, top_k=top_k)
    except PipelineError as exc:
        raise DataError(str(exc)) from exc
    click.echo(json.dumps({
        "stop_reason": result.stop_reason.value,
        "stop_detail": result.stop_detail,
        "iterations": len(result.records),
        "final_topics": len(result.final_topics),
    }))
    if result.stop_reason is not StopReason.CONVERGED:
        click.echo(f"stopped: {result.stop_reason.value}: {result.stop_detail}", err=True)
        ctx.exit(3)


_METRIC_KEYS = ("rand", "ari", "vdm", "vi_nats", "nvi")


@cli.command("compare")
@click.option("--a", "path_a", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--metrics", default=",".join(_METRIC_KEYS), show_default=True,
              help="comma-separated subset of rand,ari,vdm,vi_nats,nvi")
def cmd_compare(path_a, path_b, metrics):
    """Print agreement indices between two partition CSVs."""
    wanted = [m.strip() for m in metrics.split(",") if m.strip()]
    unknown = [m for m in wanted if m not in _METRIC_KEYS]
    if unknown or not wanted:
        raise click.UsageError(f"unknown metrics: {', '.join(unknown) or '(none given)'}")
    try:
        part_a = read_partition_csv(path_a)
        part_b = read_partition_csv(path_b)
        report = compare(part_a, part_b).to_dict()
    except PipelineError as exc:
        raise DataError(str(exc)) from exc
    click.echo(json.dumps({key: report[key] for key in wanted}))


def _markdown_report(summary: list, indices: list, topics: list, meta: dict) -> str:
    lines = ["# Run report", ""]
    status = meta.get("stop_reason", "unknown")
    lines.append(f"Stopped: **{status}** ({meta.get('stop_detail', '')})")
    if status != StopReason.CONVERGED.value:
        lines.append("")
        lines.append("Note: the run did not converge; results below are partial.")
    lines += ["", "## Iterations", "",
              "| iter | requested_n | achieved_topics | achieved_groups | outlier_count |",
              "|---:|---:|---:|---:|---:|"]
    for row in summary:
        requested = row["requested_n"] if row["requested_n"] is not None else "-"
        lines.append(
            f"| {row['iter']} | {requested} | {row['achieved_topics']} "
            f"| {row['achieved_groups']} | {row['outlier_count']} |"
        )
    lines += ["", "## Agreement between successive iterations", ""]
    if indices:
        lines += ["| from | to | n_common | rand | ari | vdm | vi_nats | nvi |",
                  "|---:|---:|---:|---:|---:|---:|---:|---:|"]
        for row in indices:
            lines.append(
                f"| {row['from_iter']} | {row['to_iter']} | {row['n_common']} "
                f"| {row['rand']} | {row['ari']} | {row['vdm']} "
                f"| {row['vi_nats']} | {row['nvi']} |"
            )
    else:
        lines.append("(single iteration; nothing to compare)")
    lines += ["", "## Final topics", ""]
    for topic in topics:
        label = topic.get("name") or f"label {topic['label']}"
        terms = ", ".join(t["term"] for t in topic["terms"]) or "(no terms)"
        lines.append(f"- **{label}** (label {topic['label']}, {topic['size']} docs): {terms}")
    return "\n".join(lines) + "\n"


@cli.command("report")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=click.Choice(["md", "json"]),
              default="md", show_default=True)
def cmd_report(run_dir, fmt):
    """Render a completed run directory as markdown or a JSON bundle."""
    base = Path(run_dir)
    try:
        summary = load_json(base / "summary.json")
        indices = load_json(base / "indices.json")
        topics = read_topics_json(base / "final" / "topics.json")
        meta_path = base / "meta.json"
        meta = load_json(meta_path) if meta_path.exists() else {}
    except FileNotFoundError as exc:
        raise DataError(f"run directory incomplete: {exc.filename}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt run file: {exc}") from exc
    if fmt == "json":
        click.echo(json.dumps(
            {"summary": summary, "indices": indices, "final_topics": topics, "meta": meta},
            indent=2,
        ))
    else:
        click.echo(_markdown_report(summary, indices, topics, meta), nl=False)


main = cli
