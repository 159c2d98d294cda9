"""End-to-end CLI behavior: the five commands, exit codes, config file,
and run-directory golden properties."""
from __future__ import annotations

import json
import math
from pathlib import Path

import pytest
from click.testing import CliRunner

from conftest import make_planted_docs, planted_csv_text
from itertopics.cli import cli

ENGLISH_ROWS = [
    "the quick brown fox jumps over the lazy dog",
    "a second sentence with the usual words in it",
    "this is another perfectly ordinary line of text",
    "we are writing plain sentences for a test corpus",
    "the cat sat on the mat and looked at the dog",
    "that was the day the rain finally stopped here",
    "you can read all of this text without trouble",
    "it is hard to write ten distinct dull sentences",
]


def combined(result) -> str:
    try:
        err = result.stderr
    except (ValueError, AttributeError):
        err = ""
    return result.output + err


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """raw.csv -> docs.jsonl -> emb.csv for the planted corpus."""
    base = tmp_path_factory.mktemp("cliws")
    docs = make_planted_docs(marker="the")
    raw = base / "raw.csv"
    raw.write_text(planted_csv_text(docs), encoding="utf-8")
    runner = CliRunner()
    docs_path = base / "docs.jsonl"
    res = runner.invoke(
        cli, ["clean", "--input", str(raw), "--output", str(docs_path)]
    )
    assert res.exit_code == 0, combined(res)
    assert json.loads(res.output)["kept"] == len(docs)
    emb_path = base / "emb.csv"
    res = runner.invoke(
        cli,
        ["embed", "--input", str(docs_path), "--method", "tfidf-svd",
         "--dims", "5", "--min-df", "1", "--seed", "42", "--output", str(emb_path)],
    )
    assert res.exit_code == 0, combined(res)
    return {"base": base, "raw": raw, "docs": docs_path, "emb": emb_path, "n": len(docs)}


RUN_FLAGS = [
    "--min-cluster-size", "8", "--selection", "leaf", "--seed", "42",
    "--stop-metric", "vdm", "--epsilon", "0.02", "--max-iters", "20",
]


def invoke_run(runner, workspace, outdir, extra=()):
    args = [
        "run", "--docs", str(workspace["docs"]), "--embeddings", str(workspace["emb"]),
        "--outdir", str(outdir),
    ] + RUN_FLAGS + list(extra)
    return runner.invoke(cli, args)


class TestClean:
    def test_counts_and_output(self, runner, tmp_path):
        rows = ["id,text"]
        rows += [f"r{i},{text}" for i, text in enumerate(ENGLISH_ROWS)]
        rows += ["s1,hi", "s2,ok"]
        src = tmp_path / "raw.csv"
        src.write_text("\n".join(rows) + "\n", encoding="utf-8")
        out = tmp_path / "docs.jsonl"
        rejects = tmp_path / "rejects.jsonl"
        res = runner.invoke(
            cli,
            ["clean", "--input", str(src), "--output", str(out), "--rejects", str(rejects)],
        )
        assert res.exit_code == 0, combined(res)
        counts = json.loads(res.output)
        assert counts == {"read": 10, "kept": 8, "rejected_short": 2, "rejected_lang": 0}
        assert len(out.read_text(encoding="utf-8").splitlines()) == 8
        assert len(rejects.read_text(encoding="utf-8").splitlines()) == 2

    def test_language_rejections_counted(self, runner, tmp_path):
        src = tmp_path / "raw.csv"
        src.write_text(
            "id,text\n"
            "a,el virus se propaga rapido aqui pero todos tranquilos\n"
            f"b,{ENGLISH_ROWS[0]}\n",
            encoding="utf-8",
        )
        out = tmp_path / "docs.jsonl"
        res = runner.invoke(cli, ["clean", "--input", str(src), "--output", str(out)])
        assert res.exit_code == 0
        assert json.loads(res.output)["rejected_lang"] == 1

    def test_missing_input_flag_exits_one(self, runner, tmp_path):
        res = runner.invoke(cli, ["clean", "--output", str(tmp_path / "o.jsonl")])
        assert res.exit_code == 1

    def test_invalid_utf8_exits_two_with_line(self, runner, tmp_path):
        src = tmp_path / "raw.csv"
        src.write_bytes(b"id,text\na,fine here\nb,\xff\xfe broken\n")
        out = tmp_path / "docs.jsonl"
        res = runner.invoke(cli, ["clean", "--input", str(src), "--output", str(out)])
        assert res.exit_code == 2
        assert "line" in combined(res)

    def test_negative_min_chars_exits_one(self, runner, tmp_path):
        src = tmp_path / "raw.csv"
        src.write_text("id,text\na,whatever\n", encoding="utf-8")
        res = runner.invoke(
            cli,
            ["clean", "--input", str(src), "--min-chars", "-1",
             "--output", str(tmp_path / "o.jsonl")],
        )
        assert res.exit_code == 1


class TestEmbed:
    def test_tfidf_svd_shape(self, runner, tmp_path):
        docs = make_planted_docs(sizes=(50, 50), n_noise=0, marker="the")
        src = tmp_path / "docs.jsonl"
        src.write_text(
            "\n".join(json.dumps({"id": d.id, "text": d.clean}) for d in docs) + "\n",
            encoding="utf-8",
        )
        out = tmp_path / "emb.csv"
        res = runner.invoke(
            cli,
            ["embed", "--input", str(src), "--dims", "5", "--min-df", "1",
             "--seed", "0", "--output", str(out)],
        )
        assert res.exit_code == 0, combined(res)
        assert json.loads(res.output) == {"docs": 100, "dims": 5}
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "id,e0,e1,e2,e3,e4"
        assert len(lines) == 101

    def test_external_missing_id_exits_two_naming_it(self, runner, tmp_path, workspace):
        ext = tmp_path / "ext.csv"
        lines = workspace["emb"].read_text(encoding="utf-8").splitlines()
        ext.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")  # drop last doc
        missing_id = lines[-1].split(",")[0]
        res = runner.invoke(
            cli,
            ["embed", "--input", str(workspace["docs"]), "--method", "external",
             "--embeddings", str(ext), "--output", str(tmp_path / "o.csv")],
        )
        assert res.exit_code == 2
        assert missing_id in combined(res)

    def test_external_requires_embeddings_flag(self, runner, workspace, tmp_path):
        res = runner.invoke(
            cli,
            ["embed", "--input", str(workspace["docs"]), "--method", "external",
             "--output", str(tmp_path / "o.csv")],
        )
        assert res.exit_code == 1

    def test_dims_beyond_vocabulary_exits_two(self, runner, tmp_path):
        src = tmp_path / "docs.jsonl"
        src.write_text(
            json.dumps({"id": "a", "text": "one two three"}) + "\n"
            + json.dumps({"id": "b", "text": "one two four"}) + "\n",
            encoding="utf-8",
        )
        res = runner.invoke(
            cli,
            ["embed", "--input", str(src), "--dims", "50", "--min-df", "1",
             "--output", str(tmp_path / "o.csv")],
        )
        assert res.exit_code == 2


class TestRun:
    def test_converges_and_writes_run_dir(self, runner, workspace, tmp_path):
        outdir = tmp_path / "run"
        res = invoke_run(runner, workspace, outdir)
        assert res.exit_code == 0, combined(res)
        payload = json.loads(res.output)
        assert payload["stop_reason"] == "Converged"
        summary = json.loads((outdir / "summary.json").read_text(encoding="utf-8"))
        assert [set(row) for row in summary] == [
            {"iter", "requested_n", "achieved_topics", "achieved_groups", "outlier_count"}
        ] * len(summary)
        assert summary[0]["iter"] == 0
        indices = json.loads((outdir / "indices.json").read_text(encoding="utf-8"))
        assert len(indices) == len(summary) - 1
        assert (outdir / "final" / "assignments.csv").is_file()
        assert (outdir / "final" / "topics.json").is_file()
        for row in summary:
            assert (outdir / f"iter_{row['iter']}" / "assignments.csv").is_file()

    def test_epsilon_zero_exits_three_max_iters(self, runner, workspace, tmp_path):
        outdir = tmp_path / "run0"
        res = invoke_run(
            runner, workspace, outdir,
            extra=["--epsilon", "0", "--max-iters", "2"],
        )
        assert res.exit_code == 3
        assert "MaxIters" in combined(res)
        assert (outdir / "summary.json").is_file()

    def test_tiny_corpus_exits_three_degenerate(self, runner, tmp_path):
        src = tmp_path / "docs.jsonl"
        src.write_text(
            "\n".join(
                json.dumps({"id": f"d{i}", "text": f"alpha beta w{i}"}) for i in range(6)
            ) + "\n",
            encoding="utf-8",
        )
        emb = tmp_path / "emb.csv"
        emb.write_text(
            "id,e0\n" + "".join(f"d{i},{float(i)}\n" for i in range(6)), encoding="utf-8"
        )
        res = runner.invoke(
            cli,
            ["run", "--docs", str(src), "--embeddings", str(emb),
             "--outdir", str(tmp_path / "run")],
        )
        assert res.exit_code == 3
        assert "Degenerate" in combined(res)

    def test_misaligned_embeddings_exit_two(self, runner, workspace, tmp_path):
        emb = tmp_path / "emb.csv"
        emb.write_text("id,e0\nnot-a-doc,1.0\n", encoding="utf-8")
        res = runner.invoke(
            cli,
            ["run", "--docs", str(workspace["docs"]), "--embeddings", str(emb),
             "--outdir", str(tmp_path / "run")],
        )
        assert res.exit_code == 2

    def test_unknown_stop_metric_exits_one(self, runner, workspace, tmp_path):
        res = invoke_run(
            runner, workspace, tmp_path / "runx", extra=["--stop-metric", "euclid"]
        )
        assert res.exit_code == 1


class TestCompare:
    def write_partition(self, path: Path, labels: list[int]):
        path.write_text(
            "id,label\n" + "".join(f"x{i},{lab}\n" for i, lab in enumerate(labels)),
            encoding="utf-8",
        )

    def test_identical_partitions_are_perfect(self, runner, tmp_path):
        a = tmp_path / "a.csv"
        self.write_partition(a, [0, 0, 1, 1, 2])
        res = runner.invoke(cli, ["compare", "--a", str(a), "--b", str(a)])
        assert res.exit_code == 0
        assert json.loads(res.output) == {
            "rand": 1.0, "ari": 1.0, "vdm": 0.0, "vi_nats": 0.0, "nvi": 0.0,
        }

    def test_worked_example_values(self, runner, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        self.write_partition(a, [1, 1, 1, 2, 2, 2])
        self.write_partition(b, [1, 1, 2, 2, 2, 2])
        res = runner.invoke(cli, ["compare", "--a", str(a), "--b", str(b)])
        assert res.exit_code == 0
        out = json.loads(res.output)
        assert out["ari"] == pytest.approx(0.32432, abs=1e-4)
        assert out["vdm"] == pytest.approx(1 / 6, abs=1e-4)
        assert out["nvi"] == pytest.approx(0.6854, abs=1e-4)
        assert out["rand"] == pytest.approx(2 / 3, abs=1e-4)
        assert out["vi_nats"] == pytest.approx(2 * math.log(2) / 2, abs=1e-4)

    def test_metric_subset(self, runner, tmp_path):
        a = tmp_path / "a.csv"
        self.write_partition(a, [0, 0, 1])
        res = runner.invoke(
            cli, ["compare", "--a", str(a), "--b", str(a), "--metrics", "ari,vdm"]
        )
        assert res.exit_code == 0
        assert list(json.loads(res.output)) == ["ari", "vdm"]

    def test_unknown_metric_exits_one(self, runner, tmp_path):
        a = tmp_path / "a.csv"
        self.write_partition(a, [0, 0])
        res = runner.invoke(
            cli, ["compare", "--a", str(a), "--b", str(a), "--metrics", "accuracy"]
        )
        assert res.exit_code == 1

    def test_disjoint_universes_exit_two(self, runner, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        a.write_text("id,label\nx0,0\nx1,0\n", encoding="utf-8")
        b.write_text("id,label\ny0,0\ny1,0\n", encoding="utf-8")
        res = runner.invoke(cli, ["compare", "--a", str(a), "--b", str(b)])
        assert res.exit_code == 2


@pytest.fixture(scope="module")
def converged_run(workspace, tmp_path_factory):
    outdir = tmp_path_factory.mktemp("rep") / "run"
    res = invoke_run(CliRunner(), workspace, outdir)
    assert res.exit_code == 0
    return outdir


class TestReport:
    def test_markdown_tables_and_topics(self, runner, converged_run):
        res = runner.invoke(cli, ["report", "--run", str(converged_run)])
        assert res.exit_code == 0
        out = res.output
        assert "## Iterations" in out
        assert "| iter | requested_n | achieved_topics |" in out
        assert "## Agreement between successive iterations" in out
        assert "## Final topics" in out
        assert "topic:0" in out
        assert "Converged" in out

    def test_json_bundle(self, runner, converged_run):
        res = runner.invoke(cli, ["report", "--run", str(converged_run), "--format", "json"])
        assert res.exit_code == 0
        bundle = json.loads(res.output)
        assert set(bundle) == {"summary", "indices", "final_topics", "meta"}
        assert bundle["meta"]["stop_reason"] == "Converged"

    def test_degenerate_run_notes_partial_status(self, runner, tmp_path):
        src = tmp_path / "docs.jsonl"
        src.write_text(
            "\n".join(
                json.dumps({"id": f"d{i}", "text": f"alpha beta w{i}"}) for i in range(6)
            ) + "\n",
            encoding="utf-8",
        )
        emb = tmp_path / "emb.csv"
        emb.write_text(
            "id,e0\n" + "".join(f"d{i},{float(i)}\n" for i in range(6)), encoding="utf-8"
        )
        outdir = tmp_path / "run"
        res = runner.invoke(
            cli,
            ["run", "--docs", str(src), "--embeddings", str(emb), "--outdir", str(outdir)],
        )
        assert res.exit_code == 3
        res = runner.invoke(cli, ["report", "--run", str(outdir)])
        assert res.exit_code == 0
        assert "partial" in res.output
        assert "Degenerate" in res.output

    def test_incomplete_run_dir_exits_two(self, runner, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        res = runner.invoke(cli, ["report", "--run", str(empty)])
        assert res.exit_code == 2


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_win(self, runner, workspace, tmp_path):
        cfg = tmp_path / "pipeline.cfg"
        cfg.write_text(
            "min-cluster-size=8\nselection=leaf\nseed=42\nstop-metric=vdm\n"
            "epsilon=0.02\nmax-iters=20\n",
            encoding="utf-8",
        )
        out_cfg = tmp_path / "run_cfg"
        res = runner.invoke(
            cli,
            ["--config", str(cfg), "run", "--docs", str(workspace["docs"]),
             "--embeddings", str(workspace["emb"]), "--outdir", str(out_cfg)],
        )
        assert res.exit_code == 0, combined(res)
        out_flags = tmp_path / "run_flags"
        res = invoke_run(runner, workspace, out_flags)
        assert res.exit_code == 0
        for name in ("summary.json", "indices.json", "meta.json"):
            assert (out_cfg / name).read_bytes() == (out_flags / name).read_bytes()

        # An explicit flag must override the config value.
        bad_cfg = tmp_path / "bad.cfg"
        bad_cfg.write_text(
            "min-cluster-size=8\nselection=leaf\nseed=42\nepsilon=0.9\n", encoding="utf-8"
        )
        out_override = tmp_path / "run_override"
        res = runner.invoke(
            cli,
            ["--config", str(bad_cfg), "run", "--docs", str(workspace["docs"]),
             "--embeddings", str(workspace["emb"]), "--epsilon", "0.02",
             "--outdir", str(out_override)],
        )
        assert res.exit_code == 0
        meta = json.loads((out_override / "meta.json").read_text(encoding="utf-8"))
        assert "0.02" in meta["stop_detail"]

    def test_malformed_config_exits_one(self, runner, workspace, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("not a key value line\n", encoding="utf-8")
        res = runner.invoke(
            cli,
            ["--config", str(cfg), "run", "--docs", str(workspace["docs"]),
             "--embeddings", str(workspace["emb"]), "--outdir", str(tmp_path / "r")],
        )
        assert res.exit_code == 1


class TestDeterminism:
    def test_repeated_runs_are_byte_identical(self, runner, workspace, tmp_path):
        dirs = [tmp_path / "one", tmp_path / "two"]
        for outdir in dirs:
            res = invoke_run(runner, workspace, outdir)
            assert res.exit_code == 0
        files_a = sorted(p.relative_to(dirs[0]) for p in dirs[0].rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(dirs[1]) for p in dirs[1].rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (dirs[0] / rel).read_bytes() == (dirs[1] / rel).read_bytes(), rel
