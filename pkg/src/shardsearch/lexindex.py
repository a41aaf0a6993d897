"""Multi-field inverted index with Okapi BM25 ranking and stored-field lookup.

The index keeps three searchable fields (url, title, body) with separate
postings and statistics, plus a stored-field table so retrieved documents can
carry their text downstream. Building is single-writer; after ``commit`` the
index is immutable and safe for concurrent readers.
"""

from __future__ import annotations

import gzip
import json
import math
import re
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .docmodel import Document
from .errors import (
    CorruptFile,
    DuplicateDocId,
    InvalidArgs,
    InvalidStats,
    NotCommitted,
    NotFound,
)
from .results import RankedList, ScoredDoc

FIELDS = ("url", "title", "body")

SNAPSHOT_VERSION = 1

# Maximal runs of Unicode alphanumerics; underscore is a separator.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def analyze(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs. No stemming, no stopwords."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    """BM25 tuning constants: k1 (tf saturation) and b (length normalization)."""

    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self):
        if not self.k1 > 0:
            raise InvalidArgs(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise InvalidArgs(f"b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class FieldStats:
    """Per-field corpus statistics used by BM25."""

    field: str
    doc_count: int
    total_tokens: int

    @property
    def avgdl(self) -> float:
        return self.total_tokens / self.doc_count if self.doc_count else 0.0


@dataclass(frozen=True)
class GlobalStats:
    """Corpus-wide statistics injected by a federating aggregator.

    When present, a shard scores with these instead of its local statistics so
    cross-shard scores are exactly comparable.
    """

    doc_count: int
    avgdl: float
    df: Mapping[str, int]


def bm25_term_score(
    tf: int,
    df: int,
    doc_count: int,
    dl: int,
    avgdl: float,
    params: Bm25Params = Bm25Params(),
) -> float:
    """Score one term occurrence in one document.

    idf(df, N) * tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl)) with the
    nonnegative log idf = ln(1 + (N - df + 0.5) / (df + 0.5)).
    """
    if tf <= 0:
        return 0.0
    if df < 1 or df > doc_count:
        raise InvalidStats(f"df={df} inconsistent with doc_count={doc_count}")
    if avgdl <= 0:
        raise InvalidStats(f"avgdl must be positive, got {avgdl}")
    idf = math.log(1.0 + (doc_count - df + 0.5) / (df + 0.5))
    norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl)
    return idf * tf * (params.k1 + 1.0) / (tf + norm)


class LexicalIndex:
    """Inverted index over url/title/body with BM25 search and stored fields."""

    def __init__(self, params: Bm25Params = Bm25Params()):
        self.params = params
        self._committed = False
        self._ids: list[str] = []
        self._ordinal: dict[str, int] = {}
        self._stored: list[tuple[str, str, str]] = []
        # field -> term -> list of (ordinal, tf), ordinals ascending by construction
        self._postings: dict[str, dict[str, list[tuple[int, int]]]] = {f: {} for f in FIELDS}
        self._doc_len: dict[str, list[int]] = {f: [] for f in FIELDS}
        self._total_tokens: dict[str, int] = {f: 0 for f in FIELDS}

    # --- building ---

    def add(self, doc: Document) -> None:
        if self._committed:
            raise NotCommitted("index already committed; building is closed")
        if doc.id in self._ordinal:
            raise DuplicateDocId(f"document id {doc.id!r} ingested twice")
        ordinal = len(self._ids)
        self._ordinal[doc.id] = ordinal
        self._ids.append(doc.id)
        self._stored.append((doc.url, doc.title, doc.body))
        for field in FIELDS:
            tokens = analyze(getattr(doc, field))
            self._doc_len[field].append(len(tokens))
            self._total_tokens[field] += len(tokens)
            counts: dict[str, int] = {}
            for token in tokens:
                counts[token] = counts.get(token, 0) + 1
            postings = self._postings[field]
            for term, tf in counts.items():
                postings.setdefault(term, []).append((ordinal, tf))

    def commit(self) -> "LexicalIndex":
        self._committed = True
        return self

    # --- read side ---

    @property
    def committed(self) -> bool:
        return self._committed

    def __len__(self) -> int:
        return len(self._ids)

    def doc_ids(self) -> list[str]:
        return list(self._ids)

    def has_doc(self, doc_id: str) -> bool:
        return doc_id in self._ordinal

    def field_stats(self, field: str = "body") -> FieldStats:
        self._check_field(field)
        return FieldStats(
            field=field,
            doc_count=len(self._ids),
            total_tokens=self._total_tokens[field],
        )

    def term_df(self, term: str, field: str = "body") -> int:
        self._check_field(field)
        return len(self._postings[field].get(term, ()))

    def get_stored(self, doc_id: str) -> tuple[str, str, str]:
        """Return (url, title, body) byte-identical to ingestion."""
        self._require_committed()
        ordinal = self._ordinal.get(doc_id)
        if ordinal is None:
            raise NotFound(f"no document with id {doc_id!r}")
        return self._stored[ordinal]

    def search(
        self,
        query: str,
        k: int,
        field: str = "body",
        stats: GlobalStats | None = None,
    ) -> RankedList:
        """Top-k documents by summed BM25 term scores over the analyzed query.

        A token appearing twice in the query contributes two score terms. Ties
        break by doc id ascending. With ``stats`` given, idf and length
        normalization use the supplied corpus-wide values.
        """
        self._require_committed()
        self._check_field(field)
        if k < 0:
            raise InvalidArgs(f"k must be >= 0, got {k}")
        tokens = analyze(query)
        if k == 0 or not tokens or not self._ids:
            return RankedList(query_id=query)

        local = self.field_stats(field)
        doc_count = stats.doc_count if stats is not None else local.doc_count
        avgdl = stats.avgdl if stats is not None else local.avgdl
        doc_len = self._doc_len[field]
        postings = self._postings[field]

        scores: dict[int, float] = {}
        for token in tokens:
            plist = postings.get(token)
            if not plist:
                continue
            df = len(plist)
            if stats is not None:
                df = stats.df.get(token, df)
            for ordinal, tf in plist:
                score = bm25_term_score(
                    tf, df, doc_count, doc_len[ordinal], avgdl, self.params
                )
                scores[ordinal] = scores.get(ordinal, 0.0) + score

        top = sorted(scores.items(), key=lambda item: (-item[1], self._ids[item[0]]))[:k]
        entries = [
            ScoredDoc(
                doc_id=self._ids[ordinal],
                score=score,
                url=self._stored[ordinal][0],
                title=self._stored[ordinal][1],
            )
            for ordinal, score in top
        ]
        return RankedList(query_id=query, entries=entries)

    # --- persistence ---

    def save(self, path: str | Path) -> None:
        """Write a single-file snapshot: version byte, CRC32, gzipped JSON payload."""
        self._require_committed()
        payload = gzip.compress(
            json.dumps(
                {
                    "params": {"k1": self.params.k1, "b": self.params.b},
                    "ids": self._ids,
                    "stored": self._stored,
                    "postings": self._postings,
                    "doc_len": self._doc_len,
                    "total_tokens": self._total_tokens,
                },
                ensure_ascii=False,
            ).encode("utf-8")
        )
        header = struct.pack("<BIQ", SNAPSHOT_VERSION, zlib.crc32(payload), len(payload))
        Path(path).write_bytes(header + payload)

    @classmethod
    def load(cls, path: str | Path) -> "LexicalIndex":
        blob = Path(path).read_bytes()
        header_size = struct.calcsize("<BIQ")
        if len(blob) < header_size:
            raise CorruptFile(f"{path}: snapshot shorter than header")
        version, crc, length = struct.unpack_from("<BIQ", blob)
        if version != SNAPSHOT_VERSION:
            raise CorruptFile(f"{path}: unsupported snapshot version {version}")
        payload = blob[header_size:]
        if len(payload) != length:
            raise CorruptFile(f"{path}: payload length {len(payload)} != declared {length}")
        if zlib.crc32(payload) != crc:
            raise CorruptFile(f"{path}: payload checksum mismatch")
        data = json.loads(gzip.decompress(payload).decode("utf-8"))
        index = cls(params=Bm25Params(**data["params"]))
        index._ids = list(data["ids"])
        index._ordinal = {doc_id: i for i, doc_id in enumerate(index._ids)}
        index._stored = [tuple(row) for row in data["stored"]]
        index._postings = {
            field: {term: [tuple(p) for p in plist] for term, plist in terms.items()}
            for field, terms in data["postings"].items()
        }
        index._doc_len = {field: list(v) for field, v in data["doc_len"].items()}
        index._total_tokens = {field: int(v) for field, v in data["total_tokens"].items()}
        index._committed = True
        return index

    # --- helpers ---

    def _require_committed(self) -> None:
        if not self._committed:
            raise NotCommitted("operation requires a committed index")

    @staticmethod
    def _check_field(field: str) -> None:
        if field not in FIELDS:
            raise InvalidArgs(f"unknown field {field!r}; expected one of {FIELDS}")


def build_index(docs: Iterable[Document], params: Bm25Params = Bm25Params()) -> LexicalIndex:
    """Index a document stream and commit."""
    index = LexicalIndex(params=params)
    for doc in docs:
        index.add(doc)
    return index.commit()


def search_lexical(
    index: LexicalIndex,
    query: str,
    k: int,
    field: str = "body",
    stats: GlobalStats | None = None,
) -> RankedList:
    return index.search(query, k, field=field, stats=stats)


def get_stored(index: LexicalIndex, doc_id: str) -> tuple[str, str, str]:
    return index.get_stored(doc_id)
