"""Scored-result containers shared by every retrieval stage."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class ScoredDoc:
    """One retrieved document: id, score, originating shard, optional stored fields."""

    doc_id: str
    score: float
    shard: int = 0
    url: str | None = None
    title: str | None = None
    body: str | None = None
    first_stage_score: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"non-finite score for {self.doc_id!r}: {self.score}")

    def sort_key(self) -> tuple[float, str]:
        """Total order used everywhere: score descending, then doc id ascending."""
        return (-self.score, self.doc_id)


@dataclass
class RankedList:
    """An ordered retrieval result for one query.

    Entries are sorted by (score descending, doc id ascending) and doc ids are
    unique within the list.
    """

    query_id: str = ""
    entries: list[ScoredDoc] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    def validate(self) -> None:
        """Raise ValueError if ordering or uniqueness invariants are broken."""
        seen = set()
        prev = None
        for entry in self.entries:
            if entry.doc_id in seen:
                raise ValueError(f"duplicate doc id in ranked list: {entry.doc_id!r}")
            seen.add(entry.doc_id)
            key = entry.sort_key()
            if prev is not None and key < prev:
                raise ValueError(f"ranked list out of order at {entry.doc_id!r}")
            prev = key

    def to_dicts(self) -> list[dict]:
        out = []
        for e in self.entries:
            d = {"docid": e.doc_id, "score": e.score, "shard": e.shard}
            if e.url is not None:
                d["url"] = e.url
            if e.title is not None:
                d["title"] = e.title
            if e.first_stage_score is not None:
                d["first_stage_score"] = e.first_stage_score
            out.append(d)
        return out


def ranked(query_id: str, pairs) -> RankedList:
    """Build a RankedList from (doc_id, score) pairs, sorting by the tie rule."""
    entries = [ScoredDoc(doc_id=d, score=s) for d, s in pairs]
    entries.sort(key=ScoredDoc.sort_key)
    return RankedList(query_id=query_id, entries=entries)
