import json

import pytest
from click.testing import CliRunner

from conftest import random_corpus

from shardsearch.cli import cli
from shardsearch.docmodel import serialize_document


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def corpus_file(tmp_path):
    docs = random_corpus(80, seed=50, n_segments=8)
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(serialize_document(d) for d in docs) + "\n", encoding="utf-8")
    return path


def test_help_on_every_subcommand(runner):
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    subcommands = [
        "build-lexical", "build-dense", "merge-dense", "serve-shard",
        "serve-aggregator", "search", "rerank", "gen-anchor-train",
        "gen-ranking-train", "eval", "bench-latency",
    ]
    for name in subcommands:
        assert name in result.output
        sub = runner.invoke(cli, [name, "--help"])
        assert sub.exit_code == 0, name


def test_usage_error_exit_code_2(runner):
    result = runner.invoke(cli, ["build-lexical"])  # missing required opts
    assert result.exit_code == 2


def test_build_lexical_creates_partition_dirs(runner, corpus_file, tmp_path):
    out = tmp_path / "idx"
    result = runner.invoke(cli, [
        "build-lexical", "--corpus", str(corpus_file), "--out", str(out),
        "--partitions", "4", "--num-segments", "8",
    ])
    assert result.exit_code == 0, result.output
    parts = sorted(p.name for p in out.glob("part-*"))
    assert parts == ["part-0000", "part-0001", "part-0002", "part-0003"]
    for part in parts:
        assert (out / part / "lexical.idx").exists()
    plan = json.loads((out / "plan.json").read_text())
    assert plan["ranges"] == [[0, 1], [2, 3], [4, 5], [6, 7]]


def test_build_lexical_idempotent(runner, corpus_file, tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        result = runner.invoke(cli, [
            "build-lexical", "--corpus", str(corpus_file), "--out", str(out),
            "--partitions", "2", "--num-segments", "8",
        ])
        assert result.exit_code == 0
    for part in ("part-0000", "part-0001"):
        assert (out_a / part / "lexical.idx").read_bytes() == \
               (out_b / part / "lexical.idx").read_bytes()


def test_build_dense_merge_and_search(runner, corpus_file, tmp_path):
    out = tmp_path / "dense"
    result = runner.invoke(cli, [
        "build-dense", "--corpus", str(corpus_file), "--out", str(out),
        "--partitions", "2", "--num-segments", "8", "--dim", "16",
    ])
    assert result.exit_code == 0, result.output
    parts = sorted(str(p / "dense.fvi") for p in out.glob("part-*"))
    assert len(parts) == 2

    merged = tmp_path / "merged.fvi"
    result = runner.invoke(cli, ["merge-dense", *parts, "--out", str(merged)])
    assert result.exit_code == 0, result.output
    assert merged.exists()

    result = runner.invoke(cli, [
        "search", "--q", "san history", "--k", "5", "--mode", "dense",
        "--index-dir", str(out), "--dim", "16",
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert len(payload["results"]) == 5


def test_search_local_lexical(runner, corpus_file, tmp_path):
    out = tmp_path / "idx"
    runner.invoke(cli, [
        "build-lexical", "--corpus", str(corpus_file), "--out", str(out),
        "--partitions", "2", "--num-segments", "8",
    ])
    result = runner.invoke(cli, [
        "search", "--q", "san history", "--k", "10", "--index-dir", str(out),
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["query"] == "san history"
    scores = [hit["score"] for hit in payload["results"]]
    assert scores == sorted(scores, reverse=True)


def test_rerank_local(runner, corpus_file, tmp_path):
    out = tmp_path / "idx"
    runner.invoke(cli, [
        "build-lexical", "--corpus", str(corpus_file), "--out", str(out),
        "--partitions", "2", "--num-segments", "8",
    ])
    result = runner.invoke(cli, [
        "rerank", "--q", "san history", "--depth", "30", "--out-size", "5",
        "--index-dir", str(out),
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert len(payload["results"]) <= 5
    for hit in payload["results"]:
        assert "first_stage_score" in hit


def test_gen_anchor_train(runner, corpus_file, tmp_path):
    out = tmp_path / "idx"
    runner.invoke(cli, [
        "build-lexical", "--corpus", str(corpus_file), "--out", str(out),
        "--partitions", "2", "--num-segments", "8",
    ])
    docs = random_corpus(80, seed=50, n_segments=8)
    anchors = tmp_path / "anchors.tsv"
    anchors.write_text(
        "".join(f"{d.id}\t{d.title}\n" for d in docs[:5]), encoding="utf-8"
    )
    examples = tmp_path / "train.jsonl"
    result = runner.invoke(cli, [
        "gen-anchor-train", "--anchors", str(anchors), "--index-dir", str(out),
        "--out", str(examples), "--n-negatives", "10",
    ])
    assert result.exit_code == 0, result.output
    lines = examples.read_text().splitlines()
    assert len(lines) == 5
    for line in lines:
        record = json.loads(line)
        assert record["positive"] not in record["negatives"]


def test_gen_ranking_train_deterministic(runner, tmp_path):
    queries = tmp_path / "queries.tsv"
    queries.write_text("q1\tsome query text\n", encoding="utf-8")
    qrels = tmp_path / "qrels.txt"
    qrels.write_text("q1 0 pos1 1\n", encoding="utf-8")
    run = tmp_path / "run.trec"
    run.write_text(
        "".join(f"q1 Q0 r{i:03d} {i+1} {100-i}.0 sys\n" for i in range(100)),
        encoding="utf-8",
    )
    outputs = []
    for name in ("t1.jsonl", "t2.jsonl"):
        out = tmp_path / name
        result = runner.invoke(cli, [
            "gen-ranking-train", "--queries", str(queries), "--qrels", str(qrels),
            "--run", str(run), "--out", str(out), "--seed", "9",
        ])
        assert result.exit_code == 0, result.output
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_eval_command_with_report_dir(runner, tmp_path):
    qrels = tmp_path / "qrels.txt"
    qrels.write_text("q1 0 a 1\nq2 0 b 1\n", encoding="utf-8")
    run = tmp_path / "run.trec"
    run.write_text(
        "q1 Q0 a 1 9.0 sys\nq2 Q0 x 1 9.0 sys\nq2 Q0 y 2 8.0 sys\n"
        "q2 Q0 z 3 7.0 sys\nq2 Q0 b 4 6.0 sys\n",
        encoding="utf-8",
    )
    report_dir = tmp_path / "report"
    result = runner.invoke(cli, [
        "eval", "--run", str(run), "--qrels", str(qrels),
        "--report-dir", str(report_dir),
    ])
    assert result.exit_code == 0, result.output
    assert "MEAN" in result.output
    assert '"MRR": 0.625' in result.output
    assert (report_dir / "eval_metrics.json").exists()
    assert (report_dir / "eval_means.png").exists()
    assert (report_dir / "eval_per_query.tsv").exists()


def test_bench_latency_local(runner, corpus_file, tmp_path):
    out = tmp_path / "idx"
    runner.invoke(cli, [
        "build-lexical", "--corpus", str(corpus_file), "--out", str(out),
        "--partitions", "2", "--num-segments", "8",
    ])
    queries = tmp_path / "queries.txt"
    queries.write_text("san history\ngold mining\nutah settlement\n", encoding="utf-8")
    report_dir = tmp_path / "latency"
    result = runner.invoke(cli, [
        "bench-latency", "--queries", str(queries), "--index-dir", str(out),
        "--k", "10", "--repeat", "2", "--report-dir", str(report_dir),
    ])
    assert result.exit_code == 0, result.output
    summary = json.loads(result.output[: result.output.rindex("}") + 1])
    assert summary["queries"] == 3 and summary["repeat"] == 2
    assert summary["p50_ms"] <= summary["p95_ms"] <= summary["max_ms"]
    assert (report_dir / "latency_percentiles.png").exists()
    assert (report_dir / "latency_samples.tsv").exists()


def test_config_file_validation(runner, tmp_path):
    bad = tmp_path / "cfg.json"
    bad.write_text('{"bogus_field": 1}', encoding="utf-8")
    result = runner.invoke(cli, [
        "search", "--q", "x", "--config", str(bad),
    ])
    assert result.exit_code == 2
    assert "bogus_field" in result.output


def test_config_toml(runner, tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('shards = ["http://127.0.0.1:1/"]\ntimeout = 0.05\n', encoding="utf-8")
    # shards unreachable -> runtime error (1), not usage error
    result = runner.invoke(cli, ["search", "--q", "x", "--config", str(cfg)])
    assert result.exit_code == 1
