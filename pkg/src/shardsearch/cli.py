"""Command-line entry point: build indexes, serve, query, generate, evaluate.

Configuration precedence is flags > config file > defaults; every flag can
also be set through a ``SHARDSEARCH_``-prefixed environment variable.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import __version__
from .docmodel import assign_partition, iter_corpus, make_partition_plan
from .denseindex import EmbeddingSpec, FlatVectorIndex, merge_dense
from .embed import HashingEmbedder, RemoteEmbedder
from .errors import SearchError
from .evalkit import evaluate_run, filter_queries, parse_qrels, parse_run, Qrels
from .federation import HttpShard, LocalShard, federated_search, latency_percentile
from .lexindex import Bm25Params, LexicalIndex
from .rerank import RemoteScorer, RerankConfig, overlap_scorer, rerank_candidates
from .traingen import (
    SamplingConfig,
    gen_anchor_examples,
    gen_ranking_negatives,
    read_anchor_tsv,
    write_examples_jsonl,
)

PLAN_FILE = "plan.json"
LEXICAL_FILE = "lexical.idx"
DENSE_FILE = "dense.fvi"

CONFIG_FIELDS = {
    "shards": list,
    "timeout": (int, float),
    "default_k": int,
    "rerank_depth": int,
    "rerank_out": int,
    "scorer_endpoint": str,
    "embed_endpoint": str,
}


def load_config(path: str | Path | None) -> dict:
    """Load and validate a TOML or JSON config file (selected by extension)."""
    if path is None:
        return {}
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
    elif path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        raise click.UsageError(f"config {path}: extension must be .toml or .json")
    if not isinstance(data, dict):
        raise click.UsageError(f"config {path}: top level must be a table/object")
    for key, value in data.items():
        if key not in CONFIG_FIELDS:
            raise click.UsageError(f"config {path}: unknown field {key!r}")
        if not isinstance(value, CONFIG_FIELDS[key]):
            raise click.UsageError(
                f"config {path}: field {key!r} must be {CONFIG_FIELDS[key]}"
            )
    if "shards" in data and not all(isinstance(u, str) for u in data["shards"]):
        raise click.UsageError(f"config {path}: 'shards' must be a list of URLs")
    if "timeout" in data and data["timeout"] <= 0:
        raise click.UsageError(f"config {path}: 'timeout' must be positive")
    if "default_k" in data and data["default_k"] <= 0:
        raise click.UsageError(f"config {path}: 'default_k' must be positive")
    return data


def _make_embedder(kind: str, endpoint: str | None, dim: int, max_tokens: int, seed: int):
    spec = EmbeddingSpec(dim=dim, max_tokens=max_tokens)
    if kind == "remote":
        if not endpoint:
            raise click.UsageError("--embed-endpoint is required with --embedder remote")
        return RemoteEmbedder(endpoint, spec=spec)
    return HashingEmbedder(spec=spec, seed=seed)


def _load_local_shards(index_dirs: tuple[str, ...], embedder=None) -> list[LocalShard]:
    shards = []
    for i, raw in enumerate(index_dirs):
        root = Path(raw)
        part_dirs = sorted(root.glob("part-*")) if (root / PLAN_FILE).exists() else [root]
        for part in part_dirs:
            lexical = None
            dense = None
            if (part / LEXICAL_FILE).exists():
                lexical = LexicalIndex.load(part / LEXICAL_FILE)
            if (part / DENSE_FILE).exists():
                dense = FlatVectorIndex.load(part / DENSE_FILE)
            if lexical is None and dense is None:
                raise click.UsageError(f"{part}: no {LEXICAL_FILE} or {DENSE_FILE} found")
            shards.append(
                LocalShard(lexical=lexical, dense=dense, embedder=embedder,
                           shard_id=len(shards))
            )
    if not shards:
        raise click.UsageError("no shard indexes found")
    return shards


def _resolve_shards(index_dir, config, embedder=None):
    """Choose the shard set: explicit index dirs, else config shard URLs."""
    if index_dir:
        return _load_local_shards(index_dir, embedder=embedder)
    urls = list(config.get("shards", []))
    if not urls:
        raise click.UsageError("no shards: pass --index-dir or a config with 'shards'")
    timeout = float(config.get("timeout", 30.0))
    return [HttpShard(url, timeout=timeout, shard_id=i) for i, url in enumerate(urls)]


@click.group(name="shardsearch")
@click.version_option(version=__version__, prog_name="shardsearch")
def cli():
    """Sharded lexical+dense retrieval stack."""


# --- index building ----------------------------------------------------------

@cli.command("build-lexical")
@click.option("--corpus", required=True, type=click.Path(exists=True), help="JSONL corpus (.gz ok).")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--partitions", default=4, show_default=True, help="Number of shard partitions.")
@click.option("--num-segments", default=None, type=int,
              help="Total segment count; default max segment in corpus + 1.")
@click.option("--k1", default=0.9, show_default=True)
@click.option("--b", default=0.4, show_default=True)
def build_lexical(corpus, out, partitions, num_segments, k1, b):
    """Build one BM25 index per partition from a JSONL corpus."""
    docs = list(iter_corpus(corpus))
    if not docs:
        raise click.ClickException("corpus is empty")
    if num_segments is None:
        num_segments = max(d.segment for d in docs) + 1
    plan = make_partition_plan(num_segments, partitions)
    params = Bm25Params(k1=k1, b=b)
    builders = [LexicalIndex(params=params) for _ in plan.ranges]
    for doc in docs:
        builders[assign_partition(doc.segment, plan)].add(doc)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / PLAN_FILE).write_text(
        json.dumps({"num_segments": plan.num_segments,
                    "ranges": [list(r) for r in plan.ranges]}, indent=2),
        encoding="utf-8",
    )
    for i, builder in enumerate(builders):
        part_dir = out_dir / f"part-{i:04d}"
        part_dir.mkdir(exist_ok=True)
        builder.commit().save(part_dir / LEXICAL_FILE)
        first, last = plan.ranges[i]
        click.echo(f"part-{i:04d}: segments {first}-{last}, {len(builder)} docs")


@cli.command("build-dense")
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--partitions", default=4, show_default=True)
@click.option("--num-segments", default=None, type=int)
@click.option("--dim", default=768, show_default=True)
@click.option("--max-tokens", default=512, show_default=True)
@click.option("--embedder", type=click.Choice(["builtin", "remote"]), default="builtin",
              show_default=True)
@click.option("--embed-endpoint", default=None, help="Encoder service base URL.")
@click.option("--embed-field", type=click.Choice(["body", "title", "title+body"]),
              default="body", show_default=True, help="Document text fed to the encoder.")
@click.option("--seed", default=0, show_default=True, help="Builtin embedder seed.")
def build_dense(corpus, out, partitions, num_segments, dim, max_tokens, embedder,
                embed_endpoint, embed_field, seed):
    """Build one flat vector index per partition from a JSONL corpus."""
    enc = _make_embedder(embedder, embed_endpoint, dim, max_tokens, seed)
    docs = list(iter_corpus(corpus))
    if not docs:
        raise click.ClickException("corpus is empty")
    if num_segments is None:
        num_segments = max(d.segment for d in docs) + 1
    plan = make_partition_plan(num_segments, partitions)
    indexes = [FlatVectorIndex(dim=dim) for _ in plan.ranges]

    def doc_text(doc):
        if embed_field == "body":
            return doc.body
        if embed_field == "title":
            return doc.title
        return doc.title + " " + doc.body

    batch, owners = [], []
    def flush():
        if not batch:
            return
        for (doc, part), vector in zip(owners, enc.embed_texts(batch)):
            indexes[part].add(doc.id, vector)
        batch.clear()
        owners.clear()

    for doc in docs:
        part = assign_partition(doc.segment, plan)
        batch.append(doc_text(doc))
        owners.append((doc, part))
        if len(batch) >= 64:
            flush()
    flush()

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / PLAN_FILE).write_text(
        json.dumps({"num_segments": plan.num_segments,
                    "ranges": [list(r) for r in plan.ranges]}, indent=2),
        encoding="utf-8",
    )
    for i, index in enumerate(indexes):
        part_dir = out_dir / f"part-{i:04d}"
        part_dir.mkdir(exist_ok=True)
        index.save(part_dir / DENSE_FILE)
        click.echo(f"part-{i:04d}: {len(index)} vectors (dim {dim})")


@cli.command("merge-dense")
@click.argument("parts", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--dim", default=None, type=int, help="Required only when merging zero parts.")
def merge_dense_cmd(parts, out, dim):
    """Merge .fvi part files into one index."""
    loaded = [FlatVectorIndex.load(p) for p in parts]
    merged = merge_dense(loaded, dim=dim)
    merged.save(out)
    click.echo(f"merged {len(parts)} parts -> {out} ({len(merged)} vectors)")


# --- serving ------------------------------------------------------------------

@cli.command("serve-shard")
@click.option("--index-dir", required=True, type=click.Path(exists=True),
              help="Directory holding lexical.idx and/or dense.fvi.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8100, show_default=True)
@click.option("--shard-id", default=0, show_default=True)
@click.option("--embedder", type=click.Choice(["builtin", "remote"]), default="builtin",
              show_default=True)
@click.option("--embed-endpoint", default=None)
@click.option("--dim", default=768, show_default=True)
@click.option("--max-tokens", default=512, show_default=True)
@click.option("--seed", default=0, show_default=True)
def serve_shard(index_dir, host, port, shard_id, embedder, embed_endpoint, dim,
                max_tokens, seed):
    """Serve one shard's search API over HTTP."""
    from .service import create_shard_app, serve

    part = Path(index_dir)
    lexical = LexicalIndex.load(part / LEXICAL_FILE) if (part / LEXICAL_FILE).exists() else None
    dense = FlatVectorIndex.load(part / DENSE_FILE) if (part / DENSE_FILE).exists() else None
    if lexical is None and dense is None:
        raise click.UsageError(f"{part}: no {LEXICAL_FILE} or {DENSE_FILE} found")
    enc = _make_embedder(embedder, embed_endpoint, dim, max_tokens, seed) if dense else None
    shard = LocalShard(lexical=lexical, dense=dense, embedder=enc, shard_id=shard_id)
    click.echo(f"serving shard {shard_id} on http://{host}:{port}")
    serve(create_shard_app(shard), host=host, port=port)


@cli.command("serve-aggregator")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True),
              help="TOML/JSON config with shard URLs.")
@click.option("--shard", "shard_urls", multiple=True, help="Shard base URL (repeatable).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--timeout", default=None, type=float)
@click.option("--default-k", default=None, type=int)
@click.option("--scorer-endpoint", default=None, help="Remote reranker /score URL.")
def serve_aggregator(config_path, shard_urls, host, port, timeout, default_k,
                     scorer_endpoint):
    """Serve the federating aggregator over HTTP."""
    from .service import create_aggregator_app, serve

    config = load_config(config_path)
    urls = list(shard_urls) or list(config.get("shards", []))
    if not urls:
        raise click.UsageError("no shards configured: use --shard or a config file")
    timeout = timeout if timeout is not None else float(config.get("timeout", 30.0))
    k = default_k if default_k is not None else int(config.get("default_k", 10))
    scorer_endpoint = scorer_endpoint or config.get("scorer_endpoint")
    shards = [HttpShard(url, timeout=timeout, shard_id=i) for i, url in enumerate(urls)]
    app = create_aggregator_app(
        shards,
        default_k=k,
        rerank_cfg=RerankConfig(
            first_stage_depth=int(config.get("rerank_depth", 1000)),
            output_size=int(config.get("rerank_out", 10)),
        ),
        remote_scorer_endpoint=scorer_endpoint,
    )
    click.echo(f"serving aggregator for {len(urls)} shards on http://{host}:{port}")
    serve(app, host=host, port=port)


# --- querying -----------------------------------------------------------------

@cli.command("search")
@click.option("--q", required=True, help="Query text.")
@click.option("--k", default=10, show_default=True)
@click.option("--mode", type=click.Choice(["lexical", "dense"]), default="lexical",
              show_default=True)
@click.option("--field", type=click.Choice(["body", "title", "url"]), default="body",
              show_default=True)
@click.option("--stats", type=click.Choice(["per-shard", "global"]), default="per-shard",
              show_default=True)
@click.option("--aggregator", default=None, help="Aggregator base URL.")
@click.option("--index-dir", multiple=True, type=click.Path(exists=True),
              help="Local index directory (repeatable; bypasses HTTP).")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True, help="Builtin embedder seed (dense).")
@click.option("--dim", default=768, show_default=True)
def search_cmd(q, k, mode, field, stats, aggregator, index_dir, config_path, seed, dim):
    """Run one query and print the merged results as JSON."""
    if aggregator:
        import requests

        response = requests.get(
            f"{aggregator.rstrip('/')}/search",
            params={"q": q, "k": k, "mode": mode, "stats": stats, "field": field},
            timeout=float(load_config(config_path).get("timeout", 30.0)),
        )
        response.raise_for_status()
        click.echo(json.dumps(response.json(), indent=2))
        return
    embedder = _make_embedder("builtin", None, dim, 512, seed) if mode == "dense" else None
    shards = _resolve_shards(index_dir, load_config(config_path), embedder=embedder)
    result = federated_search(q, k, shards, mode=mode, stats_mode=stats, field=field)
    click.echo(json.dumps({
        "query": q,
        "results": result.ranked.to_dicts(),
        "degraded": result.degraded,
        "shard_times_ms": result.shard_times_ms,
    }, indent=2))


@cli.command("rerank")
@click.option("--q", required=True)
@click.option("--depth", default=1000, show_default=True, help="First-stage depth.")
@click.option("--out-size", default=10, show_default=True)
@click.option("--scorer", type=click.Choice(["builtin", "remote"]), default="builtin",
              show_default=True)
@click.option("--scorer-endpoint", default=None)
@click.option("--first-stage", type=click.Choice(["lexical", "dense"]), default="lexical",
              show_default=True, help="Dense needs a stored-field lookup per candidate.")
@click.option("--aggregator", default=None)
@click.option("--index-dir", multiple=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True, help="Builtin embedder seed (dense).")
@click.option("--dim", default=768, show_default=True)
def rerank_cmd(q, depth, out_size, scorer, scorer_endpoint, first_stage, aggregator,
               index_dir, config_path, seed, dim):
    """First-stage retrieve, rescore with the chosen scorer, print the top results."""
    config = load_config(config_path)
    if aggregator:
        import requests

        response = requests.get(
            f"{aggregator.rstrip('/')}/rerank",
            params={"q": q, "depth": depth, "out": out_size, "scorer": scorer,
                    "first": first_stage},
            timeout=float(config.get("timeout", 60.0)),
        )
        response.raise_for_status()
        click.echo(json.dumps(response.json(), indent=2))
        return
    embedder = _make_embedder("builtin", None, dim, 512, seed) if first_stage == "dense" else None
    shards = _resolve_shards(index_dir, config, embedder=embedder)
    cfg = RerankConfig(first_stage_depth=depth, output_size=out_size)
    if scorer == "remote":
        endpoint = scorer_endpoint or config.get("scorer_endpoint")
        if not endpoint:
            raise click.UsageError("--scorer-endpoint required with --scorer remote")
        scoring = RemoteScorer(endpoint)
    else:
        scoring = overlap_scorer
    first = federated_search(q, depth, shards, mode=first_stage, stored=True)
    if first_stage == "dense":
        for entry in first.ranked.entries:
            if entry.body is None:
                for shard in shards:
                    doc = shard.get_doc(entry.doc_id)
                    if doc is not None:
                        entry.url, entry.title = doc.get("url"), doc.get("title")
                        entry.body = doc.get("body")
                        break
    reranked = rerank_candidates(q, first.ranked, cfg, scoring)
    click.echo(json.dumps({"query": q, "results": reranked.to_dicts()}, indent=2))


# --- training data -------------------------------------------------------------

@cli.command("gen-anchor-train")
@click.option("--anchors", required=True, type=click.Path(exists=True),
              help="TSV: target_doc_id<TAB>anchor_text.")
@click.option("--index-dir", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--n-negatives", default=30, show_default=True)
@click.option("--resolve-texts", is_flag=True, help="Inline url/title/body in the output.")
def gen_anchor_train(anchors, index_dir, out, n_negatives, resolve_texts):
    """Generate BM25-negative training examples from anchor text."""
    shards = _load_local_shards(index_dir)
    retriever = _FederatedRetriever(shards)
    cfg = SamplingConfig(n_bm25_negatives=n_negatives)
    examples = gen_anchor_examples(read_anchor_tsv(anchors), retriever, cfg)
    resolver = retriever.get_stored if resolve_texts else None
    count = write_examples_jsonl(examples, out, resolve_text=resolver)
    click.echo(f"wrote {count} examples -> {out}")


@cli.command("gen-ranking-train")
@click.option("--queries", required=True, type=click.Path(exists=True),
              help="TSV: query_id<TAB>query_text.")
@click.option("--qrels", "qrels_path", required=True, type=click.Path(exists=True))
@click.option("--run", "run_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--pool-depth", default=100, show_default=True)
@click.option("--n-negatives", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
def gen_ranking_train(queries, qrels_path, run_path, out, pool_depth, n_negatives, seed):
    """Generate seeded random-negative examples from an existing ranking."""
    query_list = _read_query_tsv(queries)
    qrels = parse_qrels(qrels_path)
    run = parse_run(run_path)
    cfg = SamplingConfig(pool_depth=pool_depth, n_random_negatives=n_negatives,
                         rng_seed=seed)
    count = write_examples_jsonl(gen_ranking_negatives(query_list, qrels, run, cfg), out)
    click.echo(f"wrote {count} examples -> {out}")


# --- evaluation and benchmarking ------------------------------------------------

@cli.command("eval")
@click.option("--run", "run_path", required=True, type=click.Path(exists=True))
@click.option("--qrels", "qrels_path", required=True, type=click.Path(exists=True))
@click.option("--queries", default=None, type=click.Path(exists=True),
              help="Optional query TSV; enables one-word/no-relevant filtering.")
@click.option("--recall-cutoffs", default="500,1000", show_default=True)
@click.option("--precision-cutoffs", default="5,10", show_default=True)
@click.option("--report-dir", default=None, type=click.Path(),
              help="Write JSON/TSV/table/figures here.")
def eval_cmd(run_path, qrels_path, queries, recall_cutoffs, precision_cutoffs, report_dir):
    """Evaluate a run file against qrels and print the metric table."""
    qrels = parse_qrels(qrels_path)
    run = parse_run(run_path)
    if queries:
        kept = filter_queries(_read_query_tsv(queries), qrels)
        kept_ids = {qid for qid, _ in kept}
        qrels = Qrels({qid: qrels.grades(qid) for qid in qrels.query_ids()
                       if qid in kept_ids})
    report = evaluate_run(
        run,
        qrels,
        recall_cutoffs=[int(x) for x in recall_cutoffs.split(",") if x],
        precision_cutoffs=[int(x) for x in precision_cutoffs.split(",") if x],
    )
    click.echo(report.to_table())
    click.echo(report.to_json())
    if report_dir:
        from .report import save_eval_report

        paths = save_eval_report(report, report_dir)
        click.echo(f"report written to {report_dir}: "
                   + ", ".join(p.name for p in paths.values()))


@cli.command("bench-latency")
@click.option("--queries", required=True, type=click.Path(exists=True),
              help="One query per line, or TSV query_id<TAB>text.")
@click.option("--repeat", default=1, show_default=True)
@click.option("--k", default=1000, show_default=True)
@click.option("--mode", type=click.Choice(["lexical", "dense"]), default="lexical",
              show_default=True)
@click.option("--aggregator", default=None)
@click.option("--index-dir", multiple=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--report-dir", default=None, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--dim", default=768, show_default=True)
def bench_latency(queries, repeat, k, mode, aggregator, index_dir, config_path,
                  report_dir, seed, dim):
    """Replay a query file and print nearest-rank p50/p95/max latency."""
    texts = [text for _, text in _read_query_tsv(queries)]
    if not texts:
        raise click.ClickException("query file is empty")
    samples_ms: list[float] = []

    if aggregator:
        import requests

        session = requests.Session()
        url = f"{aggregator.rstrip('/')}/search"
        def one(text):
            response = session.get(url, params={"q": text, "k": k, "mode": mode},
                                   timeout=float(load_config(config_path).get("timeout", 60.0)))
            response.raise_for_status()
    else:
        embedder = _make_embedder("builtin", None, dim, 512, seed) if mode == "dense" else None
        shards = _resolve_shards(index_dir, load_config(config_path),
                                 embedder=embedder)
        def one(text):
            federated_search(text, k, shards, mode=mode)

    for _ in range(repeat):
        for text in texts:
            started = time.perf_counter()
            one(text)
            samples_ms.append((time.perf_counter() - started) * 1000.0)

    summary = {
        "queries": len(texts),
        "repeat": repeat,
        "p50_ms": latency_percentile(samples_ms, 0.50),
        "p95_ms": latency_percentile(samples_ms, 0.95),
        "max_ms": max(samples_ms),
    }
    click.echo(json.dumps(summary, indent=2))
    if report_dir:
        from .report import save_latency_report

        save_latency_report(samples_ms, report_dir)
        click.echo(f"latency report written to {report_dir}")


# --- helpers --------------------------------------------------------------------

class _FederatedRetriever:
    """search/has_doc/get_stored over a list of local shards (per-shard stats)."""

    def __init__(self, shards):
        self.shards = shards

    def search(self, query, k, field="body"):
        return federated_search(query, k, self.shards, mode="lexical",
                                field=field).ranked

    def has_doc(self, doc_id):
        return any(s.get_doc(doc_id) is not None for s in self.shards)

    def get_stored(self, doc_id):
        for shard in self.shards:
            doc = shard.get_doc(doc_id)
            if doc is not None:
                return (doc["url"], doc["title"], doc["body"])
        raise KeyError(doc_id)


def _read_query_tsv(path) -> list[tuple[str, str]]:
    out = []
    with open(path, encoding="utf-8") as handle:
        for i, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" in line:
                qid, text = line.split("\t", 1)
            else:
                qid, text = str(i), line
            out.append((qid, text))
    return out


def main():
    try:
        cli(auto_envvar_prefix="SHARDSEARCH")
    except SearchError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
