"""Second-stage pipeline: rescore first-stage candidates, return a small top-M.

A scorer maps (query, (url, title, body)) to a finite float and is either a
local callable or a remote HTTP service speaking ``POST /score``. The output
is ordered purely by scorer score (ties by doc id); first-stage scores ride
along as metadata only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import requests

from .errors import InvalidArgs, ScorerFailure, ShapeMismatch, Timeout, Upstream
from .lexindex import analyze
from .results import RankedList, ScoredDoc

DEFAULT_BATCH_SIZE = 32


@dataclass(frozen=True)
class RerankConfig:
    first_stage_depth: int = 1000
    output_size: int = 10

    def __post_init__(self):
        if not 0 < self.output_size <= self.first_stage_depth:
            raise InvalidArgs(
                f"need 0 < output_size <= first_stage_depth, got "
                f"{self.output_size} / {self.first_stage_depth}"
            )


def overlap_scorer(query: str, doc: tuple[str, str, str]) -> float:
    """Fraction of distinct query tokens present in title+body.

    Deterministic built-in scorer for tests and offline runs.
    """
    query_terms = set(analyze(query))
    if not query_terms:
        return 0.0
    _, title, body = doc
    doc_terms = set(analyze(title + " " + body))
    return len(query_terms & doc_terms) / len(query_terms)


class RemoteScorer:
    """Batching client for the ``POST /score`` wire contract."""

    def __init__(
        self,
        endpoint: str,
        batch_size: int = DEFAULT_BATCH_SIZE,
        timeout: float | None = 30.0,
    ):
        if batch_size < 1:
            raise InvalidArgs(f"batch_size must be >= 1, got {batch_size}")
        self.endpoint = endpoint
        self.batch_size = batch_size
        self.timeout = timeout
        self._session = requests.Session()

    def score_batch(self, query: str, docs: list[tuple[str, str, str]]) -> list[float]:
        """One score per doc, order-aligned; batching is transparent."""
        scores: list[float] = []
        for start in range(0, len(docs), self.batch_size):
            batch = docs[start : start + self.batch_size]
            scores.extend(self._call(query, batch))
        return scores

    def __call__(self, query: str, doc: tuple[str, str, str]) -> float:
        return self.score_batch(query, [doc])[0]

    def _call(self, query: str, docs: list[tuple[str, str, str]]) -> list[float]:
        body = {
            "query": query,
            "docs": [{"url": u, "title": t, "body": b} for u, t, b in docs],
        }
        try:
            response = self._session.post(self.endpoint, json=body, timeout=self.timeout)
        except requests.Timeout as exc:
            raise Timeout(f"scorer at {self.endpoint} timed out") from exc
        except requests.RequestException as exc:
            raise ScorerFailure(f"scorer at {self.endpoint} unreachable: {exc}") from exc
        if response.status_code != 200:
            raise Upstream(response.status_code, response.text)
        try:
            scores = response.json()["scores"]
        except (ValueError, KeyError) as exc:
            raise ShapeMismatch(f"scorer response not of shape {{'scores': [...]}}: {exc}") from exc
        if len(scores) != len(docs):
            raise ShapeMismatch(
                f"scorer returned {len(scores)} scores for {len(docs)} docs"
            )
        return [float(s) for s in scores]


def remote_score_batch(
    endpoint: str,
    query: str,
    docs: list[tuple[str, str, str]],
    batch_size: int = DEFAULT_BATCH_SIZE,
    timeout: float | None = 30.0,
) -> list[float]:
    if not docs:
        return []
    return RemoteScorer(endpoint, batch_size=batch_size, timeout=timeout).score_batch(
        query, docs
    )


def rerank_candidates(
    query: str,
    candidates: RankedList,
    cfg: RerankConfig = RerankConfig(),
    scorer=overlap_scorer,
) -> RankedList:
    """Score each candidate with the scorer and return the global top-M.

    Candidates must carry title and body (url may be empty). Input beyond
    first_stage_depth is truncated; an empty candidate list yields an empty
    output.
    """
    pool = candidates.entries[: cfg.first_stage_depth]
    if not pool:
        return RankedList(query_id=candidates.query_id or query)
    docs = [(entry.url or "", entry.title or "", entry.body or "") for entry in pool]
    if hasattr(scorer, "score_batch"):
        scores = scorer.score_batch(query, docs)
        if len(scores) != len(docs):
            raise ShapeMismatch(f"{len(scores)} scores for {len(docs)} candidates")
    else:
        scores = [scorer(query, doc) for doc in docs]
    rescored = [
        replace(entry, score=float(score), first_stage_score=entry.score)
        for entry, score in zip(pool, scores)
    ]
    rescored.sort(key=ScoredDoc.sort_key)
    return RankedList(
        query_id=candidates.query_id or query,
        entries=rescored[: cfg.output_size],
    )
