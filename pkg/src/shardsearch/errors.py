"""Exception types raised across the retrieval stack.

Plain I/O failures are reported with the builtin ``OSError``; everything
domain-specific derives from :class:`SearchError` so callers can catch one
base class at service boundaries.
"""


class SearchError(Exception):
    """Base class for all errors raised by this package."""


# --- document model ---------------------------------------------------------

class MalformedJson(SearchError):
    """A corpus line is not a valid JSON object."""


class MissingField(SearchError):
    """A required document field is absent."""

    def __init__(self, name: str):
        super().__init__(f"missing required field: {name!r}")
        self.name = name


class InvalidSegment(SearchError):
    """Document segment is not a non-negative integer."""


class InvalidArgs(SearchError):
    """Arguments violate a documented precondition."""


class OutOfRange(SearchError):
    """Segment does not fall inside the partition plan."""


# --- lexical index ----------------------------------------------------------

class DuplicateDocId(SearchError):
    """The same document id was ingested twice."""


class InvalidStats(SearchError):
    """BM25 statistics are inconsistent (df > N or avgdl <= 0)."""


class NotCommitted(SearchError):
    """Search or stored-field lookup on an index still being built."""


class NotFound(SearchError):
    """Requested document id is not in the index."""


# --- dense index ------------------------------------------------------------

class DimensionMismatch(SearchError):
    """Vector dimensionality differs from the index dimension."""


class DuplicateId(SearchError):
    """The same vector id appears twice (within or across parts)."""


class NonFiniteValue(SearchError):
    """A vector contains NaN or infinity."""


class CorruptFile(SearchError):
    """A persisted index file failed structural or checksum validation."""


# --- federation -------------------------------------------------------------

class DuplicateAcrossShards(SearchError):
    """Two shards returned the same document id."""


class AllShardsFailed(SearchError):
    """No shard produced a result for a federated query."""

    def __init__(self, failures):
        super().__init__(f"all {len(failures)} shards failed: {failures}")
        self.failures = failures


class EmptySamples(SearchError):
    """Percentile requested over an empty sample list."""


# --- reranking --------------------------------------------------------------

class ScorerFailure(SearchError):
    """A scorer could not produce scores for a candidate batch."""


class Upstream(ScorerFailure):
    """Remote scorer returned a non-200 response."""

    def __init__(self, status: int, body: str):
        super().__init__(f"remote scorer returned {status}: {body[:200]}")
        self.status = status
        self.body = body


class ShapeMismatch(ScorerFailure):
    """Remote scorer returned a score count different from the doc count."""


class Timeout(ScorerFailure):
    """Remote scorer did not answer within the configured timeout."""


# --- training data generation -----------------------------------------------

class RetrievalFailure(SearchError):
    """First-stage retrieval failed while generating training examples."""


# --- evaluation -------------------------------------------------------------

class NoRelevant(SearchError):
    """Recall requested for a query with no relevant documents."""


class FormatError(SearchError):
    """A qrels or run file line could not be parsed."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no
