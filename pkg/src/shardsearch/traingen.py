"""Reranker training-data generation with two negative-sampling schemes.

Anchor path: each anchor text is a query and its link target the positive;
negatives are the first N retrieved documents that are not the target.
Ranking path: negatives are drawn uniformly (seeded, per-query) from the top
of an existing ranking after removing every judged positive.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import InvalidArgs, RetrievalFailure
from .evalkit import Qrels, RunFile

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnchorRecord:
    """One inlink: the anchor text (pseudo-query) and the linked document."""

    anchor_text: str
    target_doc_id: str

    def __post_init__(self):
        if not self.anchor_text or not self.target_doc_id:
            raise InvalidArgs("anchor_text and target_doc_id must be non-empty")


@dataclass(frozen=True)
class SamplingConfig:
    n_bm25_negatives: int = 30
    pool_depth: int = 100
    n_random_negatives: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.n_bm25_negatives, self.pool_depth, self.n_random_negatives) <= 0:
            raise InvalidArgs("all sampling counts must be positive")
        if self.n_random_negatives > self.pool_depth:
            raise InvalidArgs("n_random_negatives cannot exceed pool_depth")


@dataclass
class TrainingExample:
    query: str
    positive: str
    negatives: list[str]
    short_count: bool = False

    def __post_init__(self):
        if self.positive in self.negatives:
            raise InvalidArgs(f"positive {self.positive!r} listed among negatives")
        if len(set(self.negatives)) != len(self.negatives):
            raise InvalidArgs("negatives must be pairwise distinct")

    def to_json(self) -> str:
        return json.dumps(
            {
                "query": self.query,
                "positive": self.positive,
                "negatives": self.negatives,
                "short_count": self.short_count,
            },
            ensure_ascii=False,
        )


def read_anchor_tsv(path: str | Path) -> Iterator[AnchorRecord]:
    """Read ``target_doc_id<TAB>anchor_text`` lines; bad lines are logged and skipped."""
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2 or not parts[0] or not parts[1]:
                logger.warning("%s:%d: skipping malformed anchor line", path, line_no)
                continue
            yield AnchorRecord(anchor_text=parts[1], target_doc_id=parts[0])


def gen_anchor_examples(
    anchors: Iterable[AnchorRecord],
    retriever,
    cfg: SamplingConfig = SamplingConfig(),
    field: str = "body",
) -> Iterator[TrainingExample]:
    """BM25 negatives: first n_bm25_negatives retrieved docs that are not the target.

    ``retriever`` needs ``search(query, k, field=...) -> RankedList`` and
    ``has_doc(doc_id) -> bool``. Anchors whose target is missing from the
    corpus are skipped with a warning; anchors with fewer retrievable
    negatives than requested emit what exists and set short_count.
    """
    skipped_missing = 0
    for record in anchors:
        if not retriever.has_doc(record.target_doc_id):
            skipped_missing += 1
            logger.warning(
                "anchor target %r not in corpus; skipped (%d so far)",
                record.target_doc_id,
                skipped_missing,
            )
            continue
        try:
            retrieved = retriever.search(
                record.anchor_text, cfg.n_bm25_negatives + 1, field=field
            )
        except Exception as exc:  # noqa: BLE001 - retrieval failure aborts the stream
            raise RetrievalFailure(
                f"retrieval failed for anchor {record.anchor_text!r}: {exc}"
            ) from exc
        negatives = [
            entry.doc_id
            for entry in retrieved.entries
            if entry.doc_id != record.target_doc_id
        ][: cfg.n_bm25_negatives]
        yield TrainingExample(
            query=record.anchor_text,
            positive=record.target_doc_id,
            negatives=negatives,
            short_count=len(negatives) < cfg.n_bm25_negatives,
        )


def _query_rng(seed: int, query_id: str) -> random.Random:
    # Stable across runs, platforms, and input order.
    digest = hashlib.blake2b(
        f"{seed}\x1f{query_id}".encode("utf-8"), digest_size=8
    ).digest()
    return random.Random(int.from_bytes(digest, "big"))


def gen_ranking_negatives(
    queries: Sequence[tuple[str, str]],
    qrels: Qrels,
    run: RunFile,
    cfg: SamplingConfig = SamplingConfig(),
) -> Iterator[TrainingExample]:
    """Random negatives from the ranking's top pool, positives excluded.

    One example per (query, judged positive). The pool is the ranking's top
    ``pool_depth`` docs minus every judged positive of that query; sampling is
    uniform without replacement with an RNG derived from (rng_seed, query id).
    """
    for query_id, text in queries:
        if query_id not in run:
            logger.warning("query %r missing from ranking; skipped", query_id)
            continue
        positives = sorted(qrels.relevant(query_id))
        if not positives:
            continue
        all_positive = set(positives)
        pool = [
            doc_id
            for doc_id in run.ranking(query_id).doc_ids()[: cfg.pool_depth]
            if doc_id not in all_positive
        ]
        rng = _query_rng(cfg.rng_seed, query_id)
        for positive in positives:
            if len(pool) <= cfg.n_random_negatives:
                negatives = list(pool)
                short = len(pool) < cfg.n_random_negatives
            else:
                negatives = rng.sample(pool, cfg.n_random_negatives)
                short = False
            yield TrainingExample(
                query=text,
                positive=positive,
                negatives=negatives,
                short_count=short,
            )


def write_examples_jsonl(
    examples: Iterable[TrainingExample],
    path: str | Path,
    resolve_text=None,
) -> int:
    """Write one JSON object per example; returns the count written.

    With ``resolve_text`` (doc_id -> (url, title, body)), each record also
    carries the resolved texts for direct trainer consumption.
    """
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            if resolve_text is None:
                handle.write(example.to_json() + "\n")
            else:
                record = json.loads(example.to_json())
                record["positive_text"] = _doc_payload(resolve_text(example.positive))
                record["negative_texts"] = [
                    _doc_payload(resolve_text(doc_id)) for doc_id in example.negatives
                ]
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count


def _doc_payload(stored: tuple[str, str, str]) -> dict:
    url, title, body = stored
    return {"url": url, "title": title, "body": body}
