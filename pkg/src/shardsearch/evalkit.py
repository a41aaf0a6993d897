"""Qrels/run handling, query filtering, and IR metrics: Recall@k, MRR, P@k.

File formats are the usual interchange ones: qrels lines are
``qid 0 docid grade`` (whitespace-delimited), run lines are the 6-column
``qid Q0 docid rank score tag``. Relevance is binary at grade >= 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import FormatError, NoRelevant
from .lexindex import analyze
from .results import RankedList, ScoredDoc

DEFAULT_RECALL_CUTOFFS = (500, 1000)
DEFAULT_PRECISION_CUTOFFS = (5, 10)


class Qrels:
    """Relevance judgments: query id -> {doc id: grade}."""

    def __init__(self, judgments: Mapping[str, Mapping[str, int]] | None = None):
        self._grades: dict[str, dict[str, int]] = {
            qid: dict(docs) for qid, docs in (judgments or {}).items()
        }

    def add(self, query_id: str, doc_id: str, grade: int) -> None:
        self._grades.setdefault(query_id, {})[doc_id] = grade

    def query_ids(self) -> list[str]:
        return list(self._grades)

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._grades

    def __len__(self) -> int:
        return len(self._grades)

    def grades(self, query_id: str) -> dict[str, int]:
        return dict(self._grades.get(query_id, {}))

    def relevant(self, query_id: str) -> set[str]:
        """Doc ids judged relevant (grade >= 1) for the query."""
        return {
            doc_id
            for doc_id, grade in self._grades.get(query_id, {}).items()
            if grade >= 1
        }


def parse_qrels(source: str | Path | Iterable[str]) -> Qrels:
    qrels = Qrels()
    for line_no, parts in _iter_columns(source, expected=4, what="qrels"):
        qid, _, docid, grade = parts
        try:
            qrels.add(qid, docid, int(grade))
        except ValueError as exc:
            raise FormatError(f"bad grade {grade!r}", line_no) from exc
    return qrels


class RunFile:
    """System rankings: query id -> RankedList, rank order preserved."""

    def __init__(self, rankings: Mapping[str, RankedList] | None = None, tag: str = "run"):
        self._rankings: dict[str, RankedList] = dict(rankings or {})
        self.tag = tag

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._rankings

    def __len__(self) -> int:
        return len(self._rankings)

    def query_ids(self) -> list[str]:
        return list(self._rankings)

    def ranking(self, query_id: str) -> RankedList:
        return self._rankings[query_id]

    def set_ranking(self, query_id: str, ranking: RankedList) -> None:
        self._rankings[query_id] = ranking


def parse_run(source: str | Path | Iterable[str]) -> RunFile:
    """Parse a TREC 6-column run; ranks must be 1..n contiguous per query."""
    rankings: dict[str, list[ScoredDoc]] = {}
    tag = "run"
    for line_no, parts in _iter_columns(source, expected=6, what="run"):
        qid, _, docid, rank, score, tag = parts
        try:
            rank_no = int(rank)
            score_val = float(score)
        except ValueError as exc:
            raise FormatError(f"bad rank/score {rank!r} {score!r}", line_no) from exc
        entries = rankings.setdefault(qid, [])
        if rank_no != len(entries) + 1:
            raise FormatError(
                f"rank {rank_no} for query {qid!r} breaks 1..n contiguity", line_no
            )
        entries.append(ScoredDoc(doc_id=docid, score=score_val))
    return RunFile(
        {qid: RankedList(query_id=qid, entries=entries) for qid, entries in rankings.items()},
        tag=tag,
    )


def write_run(run: RunFile, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for line in format_run_lines(run):
            handle.write(line + "\n")


def format_run_lines(run: RunFile) -> Iterable[str]:
    for qid in run.query_ids():
        for rank, entry in enumerate(run.ranking(qid).entries, start=1):
            yield f"{qid} Q0 {entry.doc_id} {rank} {entry.score!r} {run.tag}"


def _iter_columns(source, expected: int, what: str):
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as handle:
            yield from _iter_columns(list(handle), expected, what)
        return
    for line_no, line in enumerate(source, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) != expected:
            raise FormatError(
                f"{what} line has {len(parts)} columns, expected {expected}", line_no
            )
        yield line_no, parts


def filter_queries(
    queries: Sequence[tuple[str, str]], qrels: Qrels
) -> list[tuple[str, str]]:
    """Drop queries with <= 1 analyzed token or no relevant documents."""
    kept = []
    for query_id, text in queries:
        if len(analyze(text)) <= 1:
            continue
        if not qrels.relevant(query_id):
            continue
        kept.append((query_id, text))
    return kept


def recall_at_k(ranking: RankedList, relevant: set[str], k: int) -> float:
    if not relevant:
        raise NoRelevant("recall undefined for a query with no relevant documents")
    top = set(ranking.doc_ids()[:k])
    return len(top & relevant) / len(relevant)


def precision_at_k(ranking: RankedList, relevant: set[str], k: int) -> float:
    """|top-k ∩ relevant| / k; positions past the run's end count as non-relevant."""
    if k < 1:
        raise NoRelevant(f"k must be >= 1, got {k}")
    top = set(ranking.doc_ids()[:k])
    return len(top & relevant) / k


def reciprocal_rank(ranking: RankedList, relevant: set[str], cutoff: int | None = None) -> float:
    doc_ids = ranking.doc_ids()
    if cutoff is not None:
        doc_ids = doc_ids[:cutoff]
    for position, doc_id in enumerate(doc_ids, start=1):
        if doc_id in relevant:
            return 1.0 / position
    return 0.0


@dataclass
class MetricReport:
    """Per-query and mean metric values over the evaluated query set."""

    metric_names: list[str]
    per_query: dict[str, dict[str, float]]
    means: dict[str, float]
    query_count: int

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(
            {
                "query_count": self.query_count,
                "means": self.means,
                "per_query": self.per_query,
            },
            indent=indent,
            sort_keys=False,
        )

    def to_table(self) -> str:
        """Aligned-column text table: one row per query plus a mean row."""
        headers = ["query"] + self.metric_names
        rows = [
            [qid] + [f"{values[name]:.4f}" for name in self.metric_names]
            for qid, values in self.per_query.items()
        ]
        rows.append(["MEAN"] + [f"{self.means[name]:.4f}" for name in self.metric_names])
        widths = [
            max(len(headers[i]), *(len(row[i]) for row in rows))
            for i in range(len(headers))
        ]
        lines = [
            "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
            "  ".join("-" * w for w in widths),
        ]
        for row in rows:
            lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
        return "\n".join(lines)


def evaluate_run(
    run: RunFile,
    qrels: Qrels,
    recall_cutoffs: Sequence[int] = DEFAULT_RECALL_CUTOFFS,
    precision_cutoffs: Sequence[int] = DEFAULT_PRECISION_CUTOFFS,
    mrr_cutoff: int | None = None,
) -> MetricReport:
    """Per-query metrics, arithmetically averaged.

    Queries judged in qrels but absent from the run contribute 0 to every
    metric; run queries without judgments are ignored. Callers are expected to
    have applied filter_queries, so judged queries with no relevant document
    are skipped here.
    """
    metric_names = (
        [f"Recall@{k}" for k in recall_cutoffs]
        + ["MRR"]
        + [f"P@{k}" for k in precision_cutoffs]
    )
    per_query: dict[str, dict[str, float]] = {}
    for query_id in qrels.query_ids():
        relevant = qrels.relevant(query_id)
        if not relevant:
            continue
        if query_id in run:
            ranking = run.ranking(query_id)
            values = {f"Recall@{k}": recall_at_k(ranking, relevant, k) for k in recall_cutoffs}
            values["MRR"] = reciprocal_rank(ranking, relevant, cutoff=mrr_cutoff)
            values.update(
                {f"P@{k}": precision_at_k(ranking, relevant, k) for k in precision_cutoffs}
            )
        else:
            values = {name: 0.0 for name in metric_names}
        per_query[query_id] = values
    count = len(per_query)
    means = {
        name: (sum(values[name] for values in per_query.values()) / count if count else 0.0)
        for name in metric_names
    }
    return MetricReport(
        metric_names=metric_names,
        per_query=per_query,
        means=means,
        query_count=count,
    )
