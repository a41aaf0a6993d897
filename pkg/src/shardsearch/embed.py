"""Query/document embedding sources for the dense retrieval path.

Two interchangeable providers: a remote encoder service speaking
``POST /embed`` (the real model path) and a seeded hashing embedder that
needs no model and keeps the whole pipeline runnable offline. Both truncate
to the spec's token limit and produce fixed-width float32 vectors.
"""

from __future__ import annotations

import hashlib

import numpy as np
import requests

from .denseindex import EmbeddingSpec
from .errors import ScorerFailure, ShapeMismatch, Upstream
from .lexindex import analyze


class HashingEmbedder:
    """Deterministic bag-of-hashed-tokens embedding; mean of per-token vectors.

    Every token maps to a pseudo-random vector derived from its bytes (and the
    seed), so equal texts embed equally on any host. Not semantic — a stand-in
    that exercises the dense machinery end to end.
    """

    def __init__(self, spec: EmbeddingSpec = EmbeddingSpec(), seed: int = 0):
        self.spec = spec
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.spec.dim

    def _token_vector(self, token: str) -> np.ndarray:
        cached = self._cache.get(token)
        if cached is None:
            digest = hashlib.blake2b(
                f"{self.seed}\x1f{token}".encode("utf-8"), digest_size=8
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            cached = rng.standard_normal(self.spec.dim).astype(np.float32)
            self._cache[token] = cached
        return cached

    def embed_query(self, text: str) -> np.ndarray:
        tokens = analyze(text)[: self.spec.max_tokens]
        if not tokens:
            return np.zeros(self.spec.dim, dtype=np.float32)
        acc = np.zeros(self.spec.dim, dtype=np.float32)
        for token in tokens:
            acc += self._token_vector(token)
        return acc / np.float32(len(tokens))

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        return [self.embed_query(text) for text in texts]


class RemoteEmbedder:
    """Client for an encoder service: ``POST /embed {"texts": [...]}``."""

    def __init__(
        self,
        endpoint: str,
        spec: EmbeddingSpec = EmbeddingSpec(),
        batch_size: int = 32,
        timeout: float | None = 60.0,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.spec = spec
        self.batch_size = batch_size
        self.timeout = timeout
        self._session = requests.Session()

    @property
    def dim(self) -> int:
        return self.spec.dim

    def embed_texts(self, texts: list[str]) -> list[np.ndarray]:
        vectors: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            batch = texts[start : start + self.batch_size]
            try:
                response = self._session.post(
                    f"{self.endpoint}/embed", json={"texts": batch}, timeout=self.timeout
                )
            except requests.RequestException as exc:
                raise ScorerFailure(f"embed endpoint unreachable: {exc}") from exc
            if response.status_code != 200:
                raise Upstream(response.status_code, response.text)
            payload = response.json().get("vectors", [])
            if len(payload) != len(batch):
                raise ShapeMismatch(
                    f"embed endpoint returned {len(payload)} vectors for {len(batch)} texts"
                )
            for vec in payload:
                arr = np.asarray(vec, dtype=np.float32)
                if arr.shape != (self.spec.dim,):
                    raise ShapeMismatch(
                        f"embed endpoint returned dim {arr.shape}, expected {self.spec.dim}"
                    )
                vectors.append(arr)
        return vectors

    def embed_query(self, text: str) -> np.ndarray:
        return self.embed_texts([text])[0]
