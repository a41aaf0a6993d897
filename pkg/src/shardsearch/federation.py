"""Federated search across shard services: merge, fan-out, latency accounting.

A shard is anything providing the small client protocol below — an in-process
pair of indexes (:class:`LocalShard`) or a remote HTTP service
(:class:`HttpShard`). The aggregator queries every shard for its top-k
concurrently and merges by score, so end-to-end time tracks the slowest shard
rather than the sum.

Two statistics modes for lexical search:

* ``per-shard`` — every shard scores with its own (N, df, avgdl); raw scores
  are merged as-is. Cross-shard scores are only approximately comparable.
* ``global`` — the aggregator gathers corpus-wide N and avgdl plus per-term
  document frequencies and every shard scores with those, making the
  federated ranking identical to a single monolithic index.
"""

from __future__ import annotations

import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence
from urllib.parse import quote

import requests

from .denseindex import FlatVectorIndex
from .errors import (
    AllShardsFailed,
    DuplicateAcrossShards,
    EmptySamples,
    InvalidArgs,
    NotFound,
)
from .lexindex import GlobalStats, LexicalIndex, analyze
from .results import RankedList, ScoredDoc

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 30.0


def merge_ranked_lists(lists: Sequence[RankedList], k: int) -> RankedList:
    """Global top-k across shard lists: score descending, doc id ascending.

    Doc ids must be unique across shards (corpora are disjoint); a repeat
    raises DuplicateAcrossShards.
    """
    if k < 0:
        raise InvalidArgs(f"k must be >= 0, got {k}")
    seen: set[str] = set()
    entries: list[ScoredDoc] = []
    query_id = lists[0].query_id if lists else ""
    for ranked_list in lists:
        for entry in ranked_list.entries:
            if entry.doc_id in seen:
                raise DuplicateAcrossShards(
                    f"doc id {entry.doc_id!r} returned by more than one shard"
                )
            seen.add(entry.doc_id)
            entries.append(entry)
    entries.sort(key=ScoredDoc.sort_key)
    return RankedList(query_id=query_id, entries=entries[:k])


def latency_percentile(samples: Sequence[float], p: float) -> float:
    """Nearest-rank percentile: the ceil(p*n)-th smallest sample."""
    if not samples:
        raise EmptySamples("no latency samples recorded")
    if not 0.0 < p <= 1.0:
        raise InvalidArgs(f"p must be in (0, 1], got {p}")
    ordered = sorted(samples)
    rank = math.ceil(p * len(ordered))
    return ordered[rank - 1]


class LatencyStats:
    """Thread-safe accumulator of per-query durations with percentile summary."""

    def __init__(self):
        self._samples: list[float] = []
        self._lock = threading.Lock()

    def record(self, duration: float) -> None:
        if duration <= 0:
            raise InvalidArgs(f"durations must be positive, got {duration}")
        with self._lock:
            self._samples.append(duration)

    @property
    def samples(self) -> list[float]:
        with self._lock:
            return list(self._samples)

    def __len__(self) -> int:
        return len(self._samples)

    def percentile(self, p: float) -> float:
        return latency_percentile(self.samples, p)

    def summary(self) -> dict:
        samples = self.samples
        return {
            "count": len(samples),
            "p50": latency_percentile(samples, 0.50),
            "p95": latency_percentile(samples, 0.95),
            "max": max(samples),
        }


class ShardClient(Protocol):
    """What the aggregator needs from a shard."""

    def search(
        self,
        query: str,
        k: int,
        mode: str = "lexical",
        field: str = "body",
        stats: GlobalStats | None = None,
        stored: bool = False,
    ) -> RankedList: ...

    def stats(self, field: str = "body") -> dict: ...

    def term_df(self, terms: Sequence[str], field: str = "body") -> dict[str, int]: ...

    def get_doc(self, doc_id: str) -> dict | None: ...


class LocalShard:
    """In-process shard over a committed lexical index and/or a dense index."""

    def __init__(
        self,
        lexical: LexicalIndex | None = None,
        dense: FlatVectorIndex | None = None,
        embedder=None,
        shard_id: int = 0,
    ):
        if lexical is None and dense is None:
            raise InvalidArgs("a shard needs at least one index")
        self.lexical = lexical
        self.dense = dense
        self.embedder = embedder
        self.shard_id = shard_id

    def search(
        self,
        query: str,
        k: int,
        mode: str = "lexical",
        field: str = "body",
        stats: GlobalStats | None = None,
        stored: bool = False,
    ) -> RankedList:
        if mode == "lexical":
            if self.lexical is None:
                raise InvalidArgs(f"shard {self.shard_id} has no lexical index")
            result = self.lexical.search(query, k, field=field, stats=stats)
        elif mode == "dense":
            if self.dense is None:
                raise InvalidArgs(f"shard {self.shard_id} has no dense index")
            if self.embedder is None:
                raise InvalidArgs(f"shard {self.shard_id} has no query embedder")
            result = self.dense.search(self.embedder.embed_query(query), k)
            result.query_id = query
        else:
            raise InvalidArgs(f"unknown mode {mode!r}")
        for entry in result.entries:
            entry.shard = self.shard_id
        if stored and self.lexical is not None:
            for entry in result.entries:
                if self.lexical.has_doc(entry.doc_id):
                    entry.url, entry.title, entry.body = self.lexical.get_stored(
                        entry.doc_id
                    )
        return result

    def stats(self, field: str = "body") -> dict:
        if self.lexical is None:
            return {"N": len(self.dense or ()), "avgdl": 0.0, "df_available": False,
                    "total_tokens": 0}
        fs = self.lexical.field_stats(field)
        return {
            "N": fs.doc_count,
            "avgdl": fs.avgdl,
            "df_available": True,
            "total_tokens": fs.total_tokens,
        }

    def term_df(self, terms: Sequence[str], field: str = "body") -> dict[str, int]:
        if self.lexical is None:
            return {term: 0 for term in terms}
        return {term: self.lexical.term_df(term, field) for term in terms}

    def get_doc(self, doc_id: str) -> dict | None:
        if self.lexical is None or not self.lexical.has_doc(doc_id):
            return None
        url, title, body = self.lexical.get_stored(doc_id)
        return {"docid": doc_id, "url": url, "title": title, "body": body}


class HttpShard:
    """Client for a shard service speaking the HTTP API in service.py."""

    def __init__(self, base_url: str, timeout: float = DEFAULT_TIMEOUT_S, shard_id: int = 0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.shard_id = shard_id
        self._session = requests.Session()

    def search(
        self,
        query: str,
        k: int,
        mode: str = "lexical",
        field: str = "body",
        stats: GlobalStats | None = None,
        stored: bool = False,
    ) -> RankedList:
        if stats is None:
            params = {"q": query, "k": k, "mode": mode, "field": field}
            if stored:
                params["stored"] = "full"
            response = self._session.get(
                f"{self.base_url}/search", params=params, timeout=self.timeout
            )
        else:
            body = {
                "q": query,
                "k": k,
                "mode": mode,
                "field": field,
                "stored": "full" if stored else "ids",
                "stats": {
                    "N": stats.doc_count,
                    "avgdl": stats.avgdl,
                    "df": dict(stats.df),
                },
            }
            response = self._session.post(
                f"{self.base_url}/search", json=body, timeout=self.timeout
            )
        response.raise_for_status()
        payload = response.json()
        entries = [
            ScoredDoc(
                doc_id=hit["docid"],
                score=hit["score"],
                shard=self.shard_id,
                url=hit.get("url"),
                title=hit.get("title"),
                body=hit.get("body"),
            )
            for hit in payload["results"]
        ]
        return RankedList(query_id=query, entries=entries)

    def stats(self, field: str = "body") -> dict:
        response = self._session.get(
            f"{self.base_url}/stats", params={"field": field}, timeout=self.timeout
        )
        response.raise_for_status()
        payload = response.json()
        out = dict(payload["mode_stats"])
        out.setdefault("total_tokens", payload.get("total_tokens", 0))
        return out

    def term_df(self, terms: Sequence[str], field: str = "body") -> dict[str, int]:
        if not terms:
            return {}
        response = self._session.get(
            f"{self.base_url}/termstats",
            params={"field": field, "terms": ",".join(terms)},
            timeout=self.timeout,
        )
        response.raise_for_status()
        return {term: int(df) for term, df in response.json()["df"].items()}

    def get_doc(self, doc_id: str) -> dict | None:
        response = self._session.get(
            f"{self.base_url}/doc/{quote(doc_id, safe='')}", timeout=self.timeout
        )
        if response.status_code == 404:
            return None
        response.raise_for_status()
        return response.json()


@dataclass
class FederatedResult:
    """Merged ranking plus the per-shard accounting a degraded answer needs."""

    ranked: RankedList
    shard_times_ms: dict[int, float] = field(default_factory=dict)
    failed_shards: list[int] = field(default_factory=list)

    @property
    def degraded(self) -> bool:
        return bool(self.failed_shards)


def gather_global_stats(
    shards: Sequence[ShardClient], query: str, field: str = "body"
) -> GlobalStats:
    """Corpus-wide (N, avgdl, per-term df) for the query's analyzed terms."""
    terms = sorted(set(analyze(query)))
    doc_count = 0
    total_tokens = 0
    df: dict[str, int] = {term: 0 for term in terms}
    for shard in shards:
        stats = shard.stats(field)
        doc_count += int(stats["N"])
        total_tokens += int(stats.get("total_tokens", 0))
        for term, value in shard.term_df(terms, field).items():
            df[term] = df.get(term, 0) + int(value)
    avgdl = total_tokens / doc_count if doc_count else 0.0
    return GlobalStats(doc_count=doc_count, avgdl=avgdl, df=df)


def federated_search(
    query: str,
    k: int,
    shards: Sequence[ShardClient],
    mode: str = "lexical",
    stats_mode: str = "per-shard",
    field: str = "body",
    stored: bool = False,
    global_stats: GlobalStats | None = None,
    max_workers: int | None = None,
) -> FederatedResult:
    """Query every shard for its top-k concurrently and merge.

    Failed shards degrade the answer instead of failing it; only a total
    failure raises AllShardsFailed.
    """
    if not shards:
        raise InvalidArgs("federated_search needs at least one shard")
    if stats_mode not in ("per-shard", "global"):
        raise InvalidArgs(f"unknown stats_mode {stats_mode!r}")

    stats = None
    if stats_mode == "global" and mode == "lexical":
        stats = global_stats or gather_global_stats(shards, query, field)

    def call(indexed_shard):
        position, shard = indexed_shard
        start = time.perf_counter()
        result = shard.search(query, k, mode=mode, field=field, stats=stats, stored=stored)
        return position, result, (time.perf_counter() - start) * 1000.0

    lists: list[RankedList] = []
    times: dict[int, float] = {}
    failures: list[tuple[int, str]] = []
    with ThreadPoolExecutor(max_workers=max_workers or len(shards)) as pool:
        futures = [pool.submit(call, item) for item in enumerate(shards)]
        for position, future in enumerate(futures):
            try:
                _, result, elapsed_ms = future.result()
            except Exception as exc:  # noqa: BLE001 - shard failures degrade, not abort
                logger.warning("shard %d failed: %s", position, exc)
                failures.append((position, str(exc)))
                continue
            lists.append(result)
            times[position] = elapsed_ms

    if not lists:
        raise AllShardsFailed(failures)
    merged = merge_ranked_lists(lists, k)
    merged.query_id = query
    return FederatedResult(
        ranked=merged,
        shard_times_ms=times,
        failed_shards=[position for position, _ in failures],
    )


def fetch_stored(shards: Sequence[ShardClient], doc_id: str) -> dict:
    """Look a document up on whichever shard holds it."""
    for shard in shards:
        doc = shard.get_doc(doc_id)
        if doc is not None:
            return doc
    raise NotFound(f"no shard holds document {doc_id!r}")
