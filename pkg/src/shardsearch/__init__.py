"""Sharded lexical+dense retrieval stack.

Multi-field BM25 indexing, flat dense-vector retrieval, federated shard
search with score aggregation, a pluggable reranking stage, negative-sampling
training-data generation, and an IR evaluation kit.
"""

__version__ = "0.1.0"

from .docmodel import (
    Document,
    PartitionPlan,
    assign_partition,
    iter_corpus,
    make_partition_plan,
    parse_document,
    serialize_document,
)
from .denseindex import (
    EmbeddingSpec,
    FlatVectorIndex,
    add_vector,
    load_dense,
    merge_dense,
    persist_dense,
    search_dense,
)
from .evalkit import (
    MetricReport,
    Qrels,
    RunFile,
    evaluate_run,
    filter_queries,
    parse_qrels,
    parse_run,
    precision_at_k,
    recall_at_k,
    reciprocal_rank,
    write_run,
)
from .federation import (
    FederatedResult,
    HttpShard,
    LatencyStats,
    LocalShard,
    federated_search,
    latency_percentile,
    merge_ranked_lists,
)
from .lexindex import (
    Bm25Params,
    FieldStats,
    GlobalStats,
    LexicalIndex,
    analyze,
    bm25_term_score,
    build_index,
    get_stored,
    search_lexical,
)
from .rerank import (
    RemoteScorer,
    RerankConfig,
    overlap_scorer,
    remote_score_batch,
    rerank_candidates,
)
from .results import RankedList, ScoredDoc
from .traingen import (
    AnchorRecord,
    SamplingConfig,
    TrainingExample,
    gen_anchor_examples,
    gen_ranking_negatives,
    read_anchor_tsv,
    write_examples_jsonl,
)
