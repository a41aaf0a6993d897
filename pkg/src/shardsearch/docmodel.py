"""Document schema, JSON-lines corpus ingestion, and the segment partition plan."""

from __future__ import annotations

import gzip
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator

from .errors import InvalidArgs, InvalidSegment, MalformedJson, MissingField, OutOfRange

REQUIRED_FIELDS = ("id", "segment", "url", "title", "body")


@dataclass(frozen=True)
class Document:
    """One corpus record: the unit of ingestion, indexing, and storage."""

    id: str
    segment: int
    url: str
    title: str
    body: str


def parse_document(line: str) -> Document:
    """Parse one JSON-lines record into a Document.

    Unknown fields are ignored. ``url``, ``title``, and ``body`` may be empty
    strings but must be present.
    """
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"not valid JSON: {exc}") from exc
    if not isinstance(record, dict):
        raise MalformedJson("record is not a JSON object")
    for name in REQUIRED_FIELDS:
        if name not in record:
            raise MissingField(name)
    segment = record["segment"]
    if isinstance(segment, bool) or not isinstance(segment, int) or segment < 0:
        raise InvalidSegment(f"segment must be a non-negative integer, got {segment!r}")
    doc_id = record["id"]
    if not isinstance(doc_id, str) or not doc_id:
        raise MalformedJson(f"id must be a non-empty string, got {doc_id!r}")
    text = {}
    for name in ("url", "title", "body"):
        value = record[name]
        if not isinstance(value, str):
            raise MalformedJson(f"field {name!r} must be a string, got {type(value).__name__}")
        text[name] = value
    return Document(id=doc_id, segment=segment, **text)


def serialize_document(doc: Document) -> str:
    """Inverse of parse_document: one JSON line, UTF-8 preserved verbatim."""
    return json.dumps(asdict(doc), ensure_ascii=False)


def iter_corpus(path: str | Path) -> Iterator[Document]:
    """Yield Documents from a ``.jsonl`` corpus file (gzip detected by ``.gz`` suffix).

    Blank lines are skipped; malformed lines raise with the line number attached.
    """
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield parse_document(line)
            except (MalformedJson, MissingField, InvalidSegment) as exc:
                raise type(exc)(f"{path}:{line_no}: {exc}") from exc


@dataclass(frozen=True)
class PartitionPlan:
    """Contiguous split of segments 0..num_segments-1 into inclusive ranges."""

    num_segments: int
    ranges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.num_segments <= 0:
            raise InvalidArgs("num_segments must be positive")
        expected = 0
        for first, last in self.ranges:
            if first != expected or last < first:
                raise InvalidArgs(f"ranges are not contiguous ascending: {self.ranges}")
            expected = last + 1
        if expected != self.num_segments:
            raise InvalidArgs(
                f"ranges cover 0..{expected - 1} but num_segments is {self.num_segments}"
            )

    @property
    def num_partitions(self) -> int:
        return len(self.ranges)


def make_partition_plan(num_segments: int, num_partitions: int) -> PartitionPlan:
    """Split segments into contiguous partitions, leading ones taking ceil(n/p).

    (47, 4) yields (0-11, 12-23, 24-35, 36-46): three partitions of 12 segments
    and a final one of 11.
    """
    if num_segments <= 0 or num_partitions <= 0:
        raise InvalidArgs("num_segments and num_partitions must be positive")
    if num_partitions > num_segments:
        raise InvalidArgs(
            f"cannot split {num_segments} segments into {num_partitions} partitions"
        )
    size_big = math.ceil(num_segments / num_partitions)
    size_small = num_segments // num_partitions
    n_big = num_segments - size_small * num_partitions
    if n_big == 0:
        n_big, size_big = num_partitions, size_small
    ranges = []
    start = 0
    for i in range(num_partitions):
        size = size_big if i < n_big else size_small
        ranges.append((start, start + size - 1))
        start += size
    return PartitionPlan(num_segments=num_segments, ranges=tuple(ranges))


def assign_partition(segment: int, plan: PartitionPlan) -> int:
    """Return the index of the plan range containing ``segment``."""
    if segment < 0 or segment >= plan.num_segments:
        raise OutOfRange(f"segment {segment} outside 0..{plan.num_segments - 1}")
    for i, (first, last) in enumerate(plan.ranges):
        if first <= segment <= last:
            return i
    raise OutOfRange(f"segment {segment} not covered by plan")  # pragma: no cover
