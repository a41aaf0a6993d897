import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shardsearch.docmodel import Document
from shardsearch.lexindex import build_index

VOCAB = [
    "san", "diego", "history", "francisco", "bay", "utah", "settlement",
    "gold", "mining", "query", "search", "index", "shard", "vector",
    "dense", "sparse", "rank", "score", "web", "page", "anchor", "text",
    "train", "model", "data", "corpus", "segment", "title", "body", "url",
]


@pytest.fixture
def toy_docs():
    return [
        Document("d1", 0, "https://a.com/1", "T1", "san diego history"),
        Document("d2", 0, "https://a.com/2", "T2", "san francisco bay"),
        Document("d3", 0, "https://a.com/3", "T3", "history of utah settlement"),
    ]


@pytest.fixture
def toy_index(toy_docs):
    return build_index(toy_docs)


def random_corpus(n_docs, seed=0, min_len=2, max_len=12, n_segments=8):
    """Synthetic corpus over a small vocabulary; word repeats are common."""
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        length = rng.randint(min_len, max_len)
        body = " ".join(rng.choice(VOCAB) for _ in range(length))
        title = " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 3)))
        docs.append(
            Document(
                id=f"doc{i:05d}",
                segment=rng.randrange(n_segments),
                url=f"https://example.com/{i}",
                title=title,
                body=body,
            )
        )
    return docs


def random_queries(n_queries, seed=0, min_terms=1, max_terms=4):
    rng = random.Random(seed + 104729)
    return [
        " ".join(rng.choice(VOCAB) for _ in range(rng.randint(min_terms, max_terms)))
        for _ in range(n_queries)
    ]
